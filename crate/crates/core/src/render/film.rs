use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::math::Vec3;
use super::RenderError;

const GAMMA: f64 = 2.2;

/// Linear RGB radiance image, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Film {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Vec3>,
}

impl Film {
    pub fn new(width: u32, height: u32) -> Self {
        Film::filled(width, height, Vec3::ZERO)
    }

    pub fn filled(width: u32, height: u32, value: Vec3) -> Self {
        Film {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Vec3 {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Mean over all pixels and channels.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self.pixels.iter().map(|p| p.x + p.y + p.z).sum();
        sum / (3 * self.pixels.len()) as f64
    }

    /// Clamp to `[0, 1]`, gamma-encode with exponent 1/2.2 and quantise.
    pub fn tonemap(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for (dst, src) in out.pixels_mut().zip(&self.pixels) {
            dst.0 = [
                tonemap_channel(src.x),
                tonemap_channel(src.y),
                tonemap_channel(src.z),
            ];
        }
        out
    }

    /// Inverse of [`Film::tonemap`] up to quantisation; `tonemap` of the
    /// result reproduces `image` exactly.
    pub fn from_image(image: &RgbImage) -> Self {
        Film {
            width: image.width(),
            height: image.height(),
            pixels: image
                .pixels()
                .map(|p| Vec3::new(linearize(p.0[0]), linearize(p.0[1]), linearize(p.0[2])))
                .collect(),
        }
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        self.tonemap()
            .write_to(&mut buf, ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        buf.into_inner()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RenderError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_png_bytes()).map_err(|source| RenderError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Film, RenderError> {
        let path = path.as_ref();
        let image = image::open(path)
            .map_err(|e| RenderError::Image {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
            .to_rgb8();
        Ok(Film::from_image(&image))
    }
}

pub fn tonemap_channel(radiance: f64) -> u8 {
    let c = if radiance.is_nan() {
        0.0
    } else {
        radiance.clamp(0.0, 1.0)
    };
    (255.0 * c.powf(1.0 / GAMMA)).round() as u8
}

fn linearize(byte: u8) -> f64 {
    (byte as f64 / 255.0).powf(GAMMA)
}
