//! Scattering for the diffuse/glass mixture material.
//!
//! An interaction is Lambertian with probability `alpha` and thin BK7 glass
//! otherwise. The glass sheet never bends light: a ray either reflects
//! specularly or continues in its original direction, with the reflection
//! probability given by the thin-slab Fresnel reflectance.

use std::f64::consts::PI;

use rand::Rng;

use super::math::Vec3;
use crate::genome::Triangle;

/// Refractive index of BK7 at the sodium d-line.
pub const BK7_IOR: f64 = 1.5046;

/// Unpolarised Fresnel reflectance at an air/dielectric interface.
pub fn fresnel_dielectric(cos_i: f64, eta: f64) -> f64 {
    let cos_i = cos_i.clamp(0.0, 1.0);
    let sin2_t = (1.0 - cos_i * cos_i) / (eta * eta);
    if sin2_t >= 1.0 {
        return 1.0;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    let rs = (cos_i - eta * cos_t) / (cos_i + eta * cos_t);
    let rp = (eta * cos_i - cos_t) / (eta * cos_i + cos_t);
    0.5 * (rs * rs + rp * rp)
}

/// Total reflectance of a thin slab, summing all internal bounces:
/// `R + T² R / (1 - R²) = 2R / (1 + R)` with `T = 1 - R`.
pub fn thin_slab_reflectance(cos_i: f64, eta: f64) -> f64 {
    let r = fresnel_dielectric(cos_i, eta);
    if r >= 1.0 {
        1.0
    } else {
        2.0 * r / (1.0 + r)
    }
}

/// Which lobe handled an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lobe {
    Diffuse,
    GlassReflect,
    GlassTransmit,
}

#[derive(Debug, Clone, Copy)]
pub struct Scatter {
    pub direction: Vec3,
    /// Multiplier applied to path throughput.
    pub weight: Vec3,
    pub lobe: Lobe,
}

/// Cosine-weighted direction in the hemisphere around unit `normal`.
pub fn cosine_hemisphere<R: Rng + ?Sized>(normal: Vec3, rng: &mut R) -> Vec3 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = normal.orthonormal_basis();
    let z = (1.0 - u1).max(0.0).sqrt();
    (t * (r * phi.cos()) + b * (r * phi.sin()) + normal * z).normalize()
}

/// Samples the mixture material.
///
/// `incoming` is the unit ray direction arriving at the surface and
/// `normal` the unit geometric normal, in either orientation.
pub fn scatter<R: Rng + ?Sized>(
    tri: &Triangle,
    incoming: Vec3,
    normal: Vec3,
    rng: &mut R,
) -> Scatter {
    // face the normal against the incoming ray
    let n = if normal.dot(incoming) > 0.0 {
        -normal
    } else {
        normal
    };
    let lobe_pick: f64 = rng.random();
    if lobe_pick < tri.alpha {
        Scatter {
            direction: cosine_hemisphere(n, rng),
            weight: Vec3::from(tri.color),
            lobe: Lobe::Diffuse,
        }
    } else {
        let cos_i = -incoming.dot(n);
        let reflect_pick: f64 = rng.random();
        if reflect_pick < thin_slab_reflectance(cos_i, BK7_IOR) {
            Scatter {
                direction: (incoming + n * (2.0 * cos_i)).normalize(),
                weight: Vec3::ONE,
                lobe: Lobe::GlassReflect,
            }
        } else {
            Scatter {
                direction: incoming,
                weight: Vec3::ONE,
                lobe: Lobe::GlassTransmit,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_incidence_matches_closed_form() {
        let f0 = ((BK7_IOR - 1.0) / (BK7_IOR + 1.0)).powi(2);
        assert!((fresnel_dielectric(1.0, BK7_IOR) - f0).abs() < 1e-15);
        assert!((thin_slab_reflectance(1.0, BK7_IOR) - 2.0 * f0 / (1.0 + f0)).abs() < 1e-15);
    }

    #[test]
    fn grazing_reflects_everything() {
        assert!((fresnel_dielectric(0.0, BK7_IOR) - 1.0).abs() < 1e-12);
        assert_eq!(thin_slab_reflectance(0.0, BK7_IOR), 1.0);
    }

    #[test]
    fn reflectance_increases_towards_grazing() {
        let mut last = 0.0;
        for i in (0..=100).rev() {
            let r = thin_slab_reflectance(i as f64 / 100.0, BK7_IOR);
            assert!(r >= last - 1e-15);
            last = r;
        }
    }

    #[test]
    fn cosine_samples_stay_in_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Vec3::new(0.3, -0.4, 0.8).normalize();
        let mut mean_cos = 0.0;
        let count = 20_000;
        for _ in 0..count {
            let d = cosine_hemisphere(n, &mut rng);
            assert!((d.length() - 1.0).abs() < 1e-12);
            assert!(d.dot(n) >= 0.0);
            mean_cos += d.dot(n);
        }
        // E[cos] under a cosine-weighted density is 2/3
        assert!((mean_cos / count as f64 - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn reflection_is_mirror() {
        let tri = Triangle {
            v1: [0.0; 3],
            v2: [0.0; 3],
            v3: [0.0; 3],
            color: [1.0; 3],
            alpha: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let incoming = Vec3::new(1.0, 0.0, -1.0).normalize();
        let n = Vec3::new(0.0, 0.0, 1.0);
        let mut reflected = 0;
        for _ in 0..1000 {
            let s = scatter(&tri, incoming, n, &mut rng);
            match s.lobe {
                Lobe::GlassReflect => {
                    reflected += 1;
                    let expect = Vec3::new(1.0, 0.0, 1.0).normalize();
                    assert!((s.direction - expect).length() < 1e-12);
                }
                Lobe::GlassTransmit => assert_eq!(s.direction, incoming),
                Lobe::Diffuse => panic!("alpha 0 never scatters diffusely"),
            }
        }
        assert!(reflected > 0);
    }
}
