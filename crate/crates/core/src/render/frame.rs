//! Unit-cube wireframe overlay for visualisation renders.

use super::math::{Ray, Vec3};

fn cube_edges() -> impl Iterator<Item = (Vec3, Vec3)> {
    let corners = |i: u32| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64);
    (0..8u32).flat_map(move |a| {
        [1u32, 2, 4]
            .into_iter()
            .filter(move |bit| a & bit == 0)
            .map(move |bit| (corners(a), corners(a | bit)))
    })
}

/// Smallest ray parameter at which the ray passes within `radius` of a cube
/// edge, if any.
pub fn frame_hit(ray: &Ray, radius: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (a, b) in cube_edges() {
        let seg = b - a;
        let w0 = ray.origin - a;
        let d = ray.direction;
        let (aa, bb, cc) = (d.dot(d), d.dot(seg), seg.dot(seg));
        let (dd, ee) = (d.dot(w0), seg.dot(w0));
        let denom = aa * cc - bb * bb;
        let s = if denom.abs() < 1e-14 {
            ee / cc
        } else {
            (aa * ee - bb * dd) / denom
        }
        .clamp(0.0, 1.0);
        // re-project onto the ray after clamping the segment parameter
        let t = ((a + seg * s - ray.origin).dot(d) / aa).max(0.0);
        let dist = (ray.at(t) - (a + seg * s)).length();
        if dist <= radius && t > 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}
