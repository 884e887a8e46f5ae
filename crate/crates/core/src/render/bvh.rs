//! Bounding volume hierarchy over scene triangles.
//!
//! Nodes are stored flat in depth-first order; an interior node's left child
//! immediately follows it and `offset` points to the right child. Leaves
//! reference a run of `order`.

use super::intersect::{Hit, TriangleGeometry, RAY_EPSILON};
use super::math::{Ray, Vec3};
use crate::genome::Scene;

const MAX_LEAF: usize = 2;
/// Boxes are grown by this much so flat (axis-aligned) triangles still get
/// boxes with volume; the triangle test has the final say.
const BOX_PAD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::splat(f64::INFINITY),
        max: Vec3::splat(f64::NEG_INFINITY),
    };

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    fn padded(self) -> Aabb {
        Aabb {
            min: self.min - Vec3::splat(BOX_PAD),
            max: self.max + Vec3::splat(BOX_PAD),
        }
    }

    /// Slab test; returns whether the ray overlaps the box somewhere in `[t_min, t_max]`.
    #[inline]
    fn hit(&self, origin: Vec3, inv_dir: Vec3, t_min: f64, t_max: f64) -> bool {
        let mut lo = t_min;
        let mut hi = t_max;
        for i in 0..3 {
            let a = (self.min[i] - origin[i]) * inv_dir[i];
            let b = (self.max[i] - origin[i]) * inv_dir[i];
            // NaN (0 * inf) leaves the interval untouched.
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        lo <= hi
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the right child.
    offset: usize,
    /// Number of triangles for a leaf, 0 for an interior node.
    count: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    geometry: Vec<TriangleGeometry>,
}

fn triangle_bounds(g: &TriangleGeometry) -> Aabb {
    let mut b = Aabb::EMPTY;
    b.grow(g.v1);
    b.grow(g.v1 + g.e1);
    b.grow(g.v1 + g.e2);
    b
}

impl Bvh {
    pub fn build(scene: &Scene) -> Bvh {
        let geometry: Vec<TriangleGeometry> =
            scene.triangles.iter().map(TriangleGeometry::new).collect();
        let bounds: Vec<Aabb> = geometry.iter().map(triangle_bounds).collect();
        let centroids: Vec<Vec3> = bounds.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut order: Vec<usize> = (0..geometry.len()).collect();
        let mut nodes = Vec::with_capacity(2 * geometry.len().max(1));
        if !order.is_empty() {
            let len = order.len();
            build_recursive(&mut nodes, &mut order, 0, len, &bounds, &centroids);
        }
        Bvh {
            nodes,
            order,
            geometry,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.geometry.len()
    }

    pub fn geometry(&self, index: usize) -> &TriangleGeometry {
        &self.geometry[index]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit in `(RAY_EPSILON, t_max)`. Equal distances resolve to the
    /// lowest triangle index, matching a linear scan.
    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = [0usize; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top]];
            if !node.bounds.hit(ray.origin, inv_dir, RAY_EPSILON, limit) {
                continue;
            }
            if node.count > 0 {
                for &idx in &self.order[node.offset..node.offset + node.count] {
                    // `limit` is inclusive here so ties can be re-resolved by index.
                    let bound = if limit.is_finite() {
                        limit * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE
                    } else {
                        limit
                    };
                    if let Some((t, u, v, front_facing)) = self.geometry[idx].intersect(ray, bound)
                    {
                        let better = match best {
                            None => t < t_max,
                            Some(b) => t < b.t || (t == b.t && idx < b.triangle_index),
                        };
                        if better {
                            best = Some(Hit {
                                t,
                                triangle_index: idx,
                                u,
                                v,
                                front_facing,
                            });
                            limit = t;
                        }
                    }
                }
            } else {
                let this = stack[top];
                stack[top] = node.offset;
                stack[top + 1] = this + 1;
                top += 2;
            }
        }
        best
    }

    /// Linear scan over every triangle; the reference the tree must agree with.
    pub fn intersect_brute_force(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        for (idx, g) in self.geometry.iter().enumerate() {
            if let Some((t, u, v, front_facing)) = g.intersect(ray, limit) {
                best = Some(Hit {
                    t,
                    triangle_index: idx,
                    u,
                    v,
                    front_facing,
                });
                limit = t;
            }
        }
        best
    }

    /// Checks structural invariants: every triangle appears in exactly one
    /// leaf and lies inside that leaf's box.
    pub fn validate(&self) -> bool {
        let mut seen = vec![0usize; self.geometry.len()];
        for node in self.nodes.iter().filter(|n| n.count > 0) {
            for &idx in &self.order[node.offset..node.offset + node.count] {
                seen[idx] += 1;
                let g = &self.geometry[idx];
                if ![g.v1, g.v1 + g.e1, g.v1 + g.e2]
                    .iter()
                    .all(|&p| node.bounds.contains(p))
                {
                    return false;
                }
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

fn build_recursive(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    bounds: &[Aabb],
    centroids: &[Vec3],
) -> usize {
    let slice = &mut order[start..end];
    let node_bounds = slice
        .iter()
        .fold(Aabb::EMPTY, |acc, &i| acc.union(&bounds[i]))
        .padded();
    let index = nodes.len();
    nodes.push(Node {
        bounds: node_bounds,
        offset: start,
        count: slice.len(),
    });
    if slice.len() <= MAX_LEAF {
        return index;
    }

    let mut cb = Aabb::EMPTY;
    for &i in slice.iter() {
        cb.grow(centroids[i]);
    }
    let extent = cb.max - cb.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });

    nodes[index].count = 0;
    build_recursive(nodes, order, start, start + mid, bounds, centroids);
    let right = build_recursive(nodes, order, start + mid, end, bounds, centroids);
    nodes[index].offset = right;
    index
}
