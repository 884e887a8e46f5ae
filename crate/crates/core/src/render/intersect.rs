//! Ray/triangle intersection (Möller–Trumbore).

use super::math::{Ray, Vec3};
use crate::genome::Triangle;

/// Minimum accepted ray parameter, in cube units. Suppresses self-hits when
/// a bounce starts on the surface it left.
pub const RAY_EPSILON: f64 = 1e-4;

/// Relative determinant floor below which a ray counts as parallel to the
/// triangle plane. Also rejects zero-area triangles.
const PARALLEL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle_index: usize,
    pub u: f64,
    pub v: f64,
    /// True when the ray arrives on the side the geometric normal
    /// `(v2 - v1) × (v3 - v1)` points to.
    pub front_facing: bool,
}

/// Triangle geometry in the form the intersector wants.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub v1: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    /// Unit geometric normal; zero for degenerate triangles.
    pub normal: Vec3,
    det_floor: f64,
    degenerate: bool,
}

impl TriangleGeometry {
    pub fn new(tri: &Triangle) -> Self {
        let v1 = Vec3::from(tri.v1);
        let e1 = Vec3::from(tri.v2) - v1;
        let e2 = Vec3::from(tri.v3) - v1;
        let n = e1.cross(e2);
        let area2 = n.length();
        let scale = e1.length() * e2.length();
        let degenerate = area2.is_nan() || area2 <= PARALLEL_EPSILON * scale || area2 == 0.0;
        TriangleGeometry {
            v1,
            e1,
            e2,
            normal: if degenerate { Vec3::ZERO } else { n / area2 },
            det_floor: PARALLEL_EPSILON * scale,
            degenerate,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Returns `(t, u, v, front_facing)` for a hit with `RAY_EPSILON < t < t_max`.
    #[inline]
    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<(f64, f64, f64, bool)> {
        if self.degenerate {
            return None;
        }
        let p = ray.direction.cross(self.e2);
        let det = self.e1.dot(p);
        if det.abs() <= self.det_floor * ray.direction.length() {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - self.v1;
        let u = s.dot(p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(self.e1);
        let v = ray.direction.dot(q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = self.e2.dot(q) * inv;
        if t <= RAY_EPSILON || t >= t_max {
            return None;
        }
        Some((t, u, v, det > 0.0))
    }
}

/// Nearest intersection of `ray` with `tri` in `(RAY_EPSILON, t_max)`.
///
/// The returned barycentrics satisfy `p = (1 - u - v) v1 + u v2 + v v3`.
/// `triangle_index` is always 0; callers that know the index overwrite it.
pub fn intersect_triangle(ray: &Ray, tri: &Triangle, t_max: f64) -> Option<Hit> {
    TriangleGeometry::new(tri)
        .intersect(ray, t_max)
        .map(|(t, u, v, front_facing)| Hit {
            t,
            triangle_index: 0,
            u,
            v,
            front_facing,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(v1: [f64; 3], v2: [f64; 3], v3: [f64; 3]) -> Triangle {
        Triangle {
            v1,
            v2,
            v3,
            color: [0.5; 3],
            alpha: 1.0,
        }
    }

    #[test]
    fn axis_aligned_hit() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let ray = Ray::new(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.0, 0.0, 1.0));
        let hit = intersect_triangle(&ray, &t, f64::INFINITY).unwrap();
        assert!((hit.t - 1.0).abs() < 1e-12);
        assert!((hit.u - 0.5).abs() < 1e-12);
        assert!((hit.v - 0.5).abs() < 1e-12);
        // normal is +z, ray travels +z: arrives from the back
        assert!(!hit.front_facing);
    }

    #[test]
    fn outside_misses() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let ray = Ray::new(Vec3::new(2.0, 2.0, -1.0), Vec3::new(0.0, 0.0, 1.0));
        assert!(intersect_triangle(&ray, &t, f64::INFINITY).is_none());
    }

    #[test]
    fn respects_t_range() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let ray = Ray::new(Vec3::new(0.2, 0.2, -1.0), Vec3::new(0.0, 0.0, 1.0));
        assert!(intersect_triangle(&ray, &t, 0.5).is_none());
        let on_surface = Ray::new(Vec3::new(0.2, 0.2, 0.0), Vec3::new(0.0, 0.0, 1.0));
        assert!(intersect_triangle(&on_surface, &t, f64::INFINITY).is_none());
    }

    #[test]
    fn degenerate_never_hits() {
        let collinear = tri([0.0, 0.0, 0.5], [0.5, 0.5, 0.5], [1.0, 1.0, 0.5]);
        let point = tri([0.3; 3], [0.3; 3], [0.3; 3]);
        for t in [collinear, point] {
            for dir in [Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, -1.0, 0.0)] {
                let ray = Ray::new(Vec3::new(0.5, 0.5, 0.0) - dir, dir);
                assert!(intersect_triangle(&ray, &t, f64::INFINITY).is_none());
            }
        }
    }

    #[test]
    fn parallel_ray_misses() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let ray = Ray::new(Vec3::new(-1.0, 0.2, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert!(intersect_triangle(&ray, &t, f64::INFINITY).is_none());
    }
}
