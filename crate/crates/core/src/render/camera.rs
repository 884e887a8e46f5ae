use serde::{Deserialize, Serialize};

use super::math::{Ray, Vec3};
use super::RenderError;

/// Pinhole camera. Pixel `(0, 0)` is the top-left corner of the film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    #[serde(default = "default_up")]
    pub up: Vec3,
    /// Vertical field of view in degrees.
    #[serde(default = "default_fov")]
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

fn default_up() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

fn default_fov() -> f64 {
    45.0
}

/// Centre of the unit cube.
pub const CUBE_CENTER: Vec3 = Vec3::new(0.5, 0.5, 0.5);

/// Distance from the cube centre used by the default side cameras.
pub const DEFAULT_CAMERA_DISTANCE: f64 = 2.2;

impl Camera {
    pub fn validate(&self) -> Result<(), RenderError> {
        let forward = self.look_at - self.position;
        if !(forward.is_finite() && self.up.is_finite()) {
            return Err(RenderError::InvalidCamera("non-finite vector".into()));
        }
        if forward.length() == 0.0 {
            return Err(RenderError::InvalidCamera(
                "position coincides with look_at".into(),
            ));
        }
        if forward.normalize().cross(self.up).length() < 1e-9 {
            return Err(RenderError::InvalidCamera(
                "up is parallel to the view direction".into(),
            ));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 180.0) {
            return Err(RenderError::InvalidCamera(format!(
                "vertical_fov {} outside (0, 180)",
                self.vertical_fov
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidCamera("empty film".into()));
        }
        Ok(())
    }

    /// Camera at `distance` from the cube centre, rotated `azimuth_deg` about
    /// the vertical axis (0° looks along +z from the −z side) and raised by
    /// `elevation_deg`.
    pub fn orbit(
        azimuth_deg: f64,
        elevation_deg: f64,
        distance: f64,
        width: u32,
        height: u32,
    ) -> Camera {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let offset = Vec3::new(
            -az.sin() * el.cos() * distance,
            el.sin() * distance,
            -az.cos() * el.cos() * distance,
        );
        Camera {
            position: CUBE_CENTER + offset,
            look_at: CUBE_CENTER,
            up: default_up(),
            vertical_fov: default_fov(),
            width,
            height,
        }
    }

    /// The four cameras on the ±z and ±x sides of the cube, looking at its centre.
    pub fn side_views(width: u32, height: u32) -> [Camera; 4] {
        [0.0, 90.0, 180.0, 270.0]
            .map(|az| Camera::orbit(az, 0.0, DEFAULT_CAMERA_DISTANCE, width, height))
    }

    pub(crate) fn frame(&self) -> CameraFrame {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        let half_h = (self.vertical_fov.to_radians() * 0.5).tan();
        let half_w = half_h * self.width as f64 / self.height as f64;
        CameraFrame {
            origin: self.position,
            forward,
            right: right * half_w,
            up: up * half_h,
            width: self.width as f64,
            height: self.height as f64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CameraFrame {
    origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    width: f64,
    height: f64,
}

impl CameraFrame {
    /// Primary ray through film position `(px, py)` in pixel units.
    #[inline]
    pub fn ray(&self, px: f64, py: f64) -> Ray {
        let sx = 2.0 * px / self.width - 1.0;
        let sy = 1.0 - 2.0 * py / self.height;
        let dir = self.forward + self.right * sx + self.up * sy;
        Ray::new(self.origin, dir.normalize())
    }
}
