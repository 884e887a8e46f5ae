//! Seeded Monte-Carlo path tracer for triangle scenes.
//!
//! Rendering splits the film into fixed 16×16 tiles. Each tile draws its
//! random numbers from its own stream keyed by `(seed, tile index)`, so the
//! image does not depend on how tiles are scheduled across threads.

mod bvh;
mod camera;
mod film;
mod frame;
mod intersect;
mod material;
mod math;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bvh::{Aabb, Bvh};
pub use camera::{Camera, CUBE_CENTER, DEFAULT_CAMERA_DISTANCE};
pub use film::{tonemap_channel, Film};
pub use frame::frame_hit;
pub use intersect::{intersect_triangle, Hit, TriangleGeometry, RAY_EPSILON};
pub use material::{
    cosine_hemisphere, fresnel_dielectric, scatter, thin_slab_reflectance, Lobe, Scatter, BK7_IOR,
};
pub use math::{Ray, Vec3};

use crate::genome::Scene;
use crate::seed::derive_seed;

pub const TILE_SIZE: u32 = 16;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid render settings: {0}")]
    InvalidSettings(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Image { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    pub samples_per_pixel: u32,
    /// Maximum number of surface interactions along a path.
    pub max_depth: u32,
    pub environment_radiance: Vec3,
    pub seed: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            samples_per_pixel: 16,
            max_depth: 8,
            environment_radiance: Vec3::ONE,
            seed: 0,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.samples_per_pixel == 0 {
            return Err(RenderError::InvalidSettings(
                "samples_per_pixel must be at least 1".into(),
            ));
        }
        if self.max_depth == 0 {
            return Err(RenderError::InvalidSettings(
                "max_depth must be at least 1".into(),
            ));
        }
        let env = self.environment_radiance;
        if !env.is_finite() || env.x < 0.0 || env.y < 0.0 || env.z < 0.0 {
            return Err(RenderError::InvalidSettings(
                "environment_radiance must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A scene together with its acceleration structure.
#[derive(Debug, Clone)]
pub struct PreparedScene<'a> {
    pub scene: &'a Scene,
    pub bvh: Bvh,
}

impl<'a> PreparedScene<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        PreparedScene {
            scene,
            bvh: Bvh::build(scene),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RenderOptions {
    /// Render tiles on the calling thread only.
    pub serial: bool,
    /// Draw the unit-cube wireframe with this line radius (visualisation only).
    pub cube_frame: Option<f64>,
}

/// Estimates the radiance arriving along `ray`.
pub fn trace<R: Rng + ?Sized>(
    ray: Ray,
    scene: &Scene,
    bvh: &Bvh,
    settings: &RenderSettings,
    rng: &mut R,
) -> Vec3 {
    let mut ray = Ray::new(ray.origin, ray.direction.normalize());
    let mut throughput = Vec3::ONE;
    for depth in 0..=settings.max_depth {
        let Some(hit) = bvh.intersect(&ray, f64::INFINITY) else {
            return throughput.mul_elem(settings.environment_radiance);
        };
        if depth == settings.max_depth {
            break;
        }
        let tri = &scene.triangles[hit.triangle_index];
        let normal = bvh.geometry(hit.triangle_index).normal;
        let s = scatter(tri, ray.direction, normal, rng);
        throughput = throughput.mul_elem(s.weight);
        if throughput.max_component() <= 0.0 {
            return Vec3::ZERO;
        }
        ray = Ray::new(ray.at(hit.t), s.direction.normalize());
    }
    Vec3::ZERO
}

pub fn render(scene: &Scene, camera: &Camera, settings: &RenderSettings) -> Film {
    render_with(
        &PreparedScene::new(scene),
        camera,
        settings,
        RenderOptions::default(),
    )
}

/// Renders with explicit options. Output is bit-identical whether or not
/// `options.serial` is set.
pub fn render_with(
    prepared: &PreparedScene<'_>,
    camera: &Camera,
    settings: &RenderSettings,
    options: RenderOptions,
) -> Film {
    let tiles_x = camera.width.div_ceil(TILE_SIZE);
    let tiles_y = camera.height.div_ceil(TILE_SIZE);
    let tile_count = tiles_x * tiles_y;
    let frame = camera.frame();

    let render_tile = |tile: u32| -> Vec<Vec3> {
        let x0 = (tile % tiles_x) * TILE_SIZE;
        let y0 = (tile / tiles_x) * TILE_SIZE;
        let x1 = (x0 + TILE_SIZE).min(camera.width);
        let y1 = (y0 + TILE_SIZE).min(camera.height);
        let tile_seed = derive_seed(settings.seed, tile as u64);
        let spp = settings.samples_per_pixel as u64;
        let mut out = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
        for y in y0..y1 {
            for x in x0..x1 {
                let local = ((y - y0) * TILE_SIZE + (x - x0)) as u64;
                // running mean; exact when every sample is equal
                let mut mean = Vec3::ZERO;
                for k in 0..settings.samples_per_pixel {
                    // every sample owns a sub-stream, so a path that changes
                    // length leaves the other samples' random numbers alone
                    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(
                        tile_seed,
                        local * spp + k as u64,
                    ));
                    let jx: f64 = rng.random();
                    let jy: f64 = rng.random();
                    let ray = frame.ray(x as f64 + jx, y as f64 + jy);
                    let framed = options.cube_frame.and_then(|r| frame_hit(&ray, r));
                    let radiance = match framed {
                        Some(t_frame)
                            if prepared
                                .bvh
                                .intersect(&ray, f64::INFINITY)
                                .is_none_or(|h| t_frame < h.t) =>
                        {
                            Vec3::ZERO
                        }
                        _ => trace(ray, prepared.scene, &prepared.bvh, settings, &mut rng),
                    };
                    mean += (radiance - mean) / (k + 1) as f64;
                }
                out.push(mean);
            }
        }
        out
    };

    let tiles: Vec<Vec<Vec3>> = if options.serial {
        (0..tile_count).map(render_tile).collect()
    } else {
        (0..tile_count).into_par_iter().map(render_tile).collect()
    };

    let mut film = Film::new(camera.width, camera.height);
    for (tile, pixels) in tiles.into_iter().enumerate() {
        let tile = tile as u32;
        let x0 = (tile % tiles_x) * TILE_SIZE;
        let y0 = (tile / tiles_x) * TILE_SIZE;
        let w = (x0 + TILE_SIZE).min(camera.width) - x0;
        for (i, p) in pixels.into_iter().enumerate() {
            let (x, y) = (x0 + i as u32 % w, y0 + i as u32 / w);
            film.pixels[(y * camera.width + x) as usize] = p;
        }
    }
    film
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Triangle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad(z: f64, color: [f64; 3], alpha: f64) -> Vec<Triangle> {
        vec![
            Triangle {
                v1: [0.0, 0.0, z],
                v2: [1.0, 0.0, z],
                v3: [1.0, 1.0, z],
                color,
                alpha,
            },
            Triangle {
                v1: [0.0, 0.0, z],
                v2: [1.0, 1.0, z],
                v3: [0.0, 1.0, z],
                color,
                alpha,
            },
        ]
    }

    fn small_camera() -> Camera {
        Camera::orbit(0.0, 0.0, 2.2, 24, 20)
    }

    #[test]
    fn empty_scene_is_environment() {
        let settings = RenderSettings {
            environment_radiance: Vec3::new(0.2, 0.4, 0.6),
            ..Default::default()
        };
        let film = render(&Scene::default(), &small_camera(), &settings);
        assert!(film.pixels.iter().all(|&p| p == Vec3::new(0.2, 0.4, 0.6)));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scene = Scene::new(
            (0..12)
                .map(|_| Triangle {
                    v1: rng.random(),
                    v2: rng.random(),
                    v3: rng.random(),
                    color: rng.random(),
                    alpha: rng.random(),
                })
                .collect(),
        );
        let prepared = PreparedScene::new(&scene);
        let settings = RenderSettings {
            samples_per_pixel: 4,
            ..Default::default()
        };
        let cam = Camera::orbit(40.0, 10.0, 2.2, 37, 29);
        let a = render_with(&prepared, &cam, &settings, RenderOptions::default());
        let b = render_with(
            &prepared,
            &cam,
            &settings,
            RenderOptions {
                serial: true,
                ..Default::default()
            },
        );
        assert_eq!(a, b);
    }

    #[test]
    fn depth_limit_returns_black() {
        // two parallel mirrors-ish glass sheets with alpha 0 would bounce;
        // with max_depth 1 any path that hits a surface is cut off
        let scene = Scene::new(quad(0.5, [1.0; 3], 1.0));
        let bvh = Bvh::build(&scene);
        let settings = RenderSettings {
            max_depth: 1,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ray = Ray::new(Vec3::new(0.3, 0.3, -1.0), Vec3::new(0.0, 0.0, 1.0));
        // one interaction is allowed, the bounce then escapes
        assert_eq!(trace(ray, &scene, &bvh, &settings, &mut rng), Vec3::ONE);

        // between two facing diffuse walls a second interaction is cut off
        let facing = Scene::new([quad(0.45, [1.0; 3], 1.0), quad(0.55, [1.0; 3], 1.0)].concat());
        let bvh = Bvh::build(&facing);
        let inside = Ray::new(Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.0, 0.0, 1.0));
        let mut black = 0;
        for _ in 0..200 {
            let r = trace(inside, &facing, &bvh, &settings, &mut rng);
            assert!(r == Vec3::ZERO || r == Vec3::ONE);
            black += (r == Vec3::ZERO) as usize;
        }
        assert!(black > 100);
    }

    #[test]
    fn cube_frame_only_in_overlay() {
        let cam = Camera::orbit(20.0, 20.0, 2.2, 32, 32);
        let settings = RenderSettings {
            samples_per_pixel: 1,
            ..Default::default()
        };
        let scene = Scene::default();
        let prepared = PreparedScene::new(&scene);
        let plain = render_with(&prepared, &cam, &settings, RenderOptions::default());
        let framed = render_with(
            &prepared,
            &cam,
            &settings,
            RenderOptions {
                cube_frame: Some(0.01),
                ..Default::default()
            },
        );
        assert!(plain.pixels.iter().all(|&p| p == Vec3::ONE));
        assert!(framed.pixels.contains(&Vec3::ZERO));
    }
}
