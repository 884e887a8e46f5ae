//! Parameter encoding of triangle scenes.
//!
//! Every triangle owns a contiguous block of genes laid out as
//! `x1 y1 z1 x2 y2 z2 x3 y3 z3 r g b [a]`. Genes are unconstrained reals;
//! each one is squashed into `[0, 1]` with the logistic function, so any
//! finite genome decodes to a valid scene inside the unit cube.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Genes per triangle when alpha is learned.
pub const GENES_LEARNABLE: usize = 13;
/// Genes per triangle when alpha is a run-wide constant.
pub const GENES_FIXED: usize = 12;

/// Smallest distance from 0 or 1 that `encode` accepts without clamping.
pub const ENCODE_CLAMP: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("genome has {actual} genes, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("gene {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("scene has {actual} triangles, expected {expected}")]
    TriangleCount { expected: usize, actual: usize },
    #[error("triangle {triangle}: {field} = {value} is outside [0, 1]")]
    OutOfRange {
        triangle: usize,
        field: &'static str,
        value: f64,
    },
    #[error("triangle count must be at least 1")]
    EmptyConfig,
    #[error("fixed alpha {0} is outside [0, 1]")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransparencyMode {
    Learnable,
    Fixed(f64),
}

impl TransparencyMode {
    pub fn validate(self) -> Result<Self, GenomeError> {
        match self {
            TransparencyMode::Fixed(a) if !(0.0..=1.0).contains(&a) => {
                Err(GenomeError::InvalidAlpha(a))
            }
            other => Ok(other),
        }
    }

    pub fn genes_per_triangle(self) -> usize {
        match self {
            TransparencyMode::Learnable => GENES_LEARNABLE,
            TransparencyMode::Fixed(_) => GENES_FIXED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeConfig {
    pub triangle_count: usize,
    pub transparency: TransparencyMode,
}

impl GenomeConfig {
    pub fn new(triangle_count: usize, transparency: TransparencyMode) -> Result<Self, GenomeError> {
        let config = GenomeConfig {
            triangle_count,
            transparency,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.triangle_count == 0 {
            return Err(GenomeError::EmptyConfig);
        }
        self.transparency.validate()?;
        Ok(())
    }

    /// Length of a genome under this configuration: 13N, or 12N with fixed alpha.
    pub fn dim(&self) -> usize {
        self.triangle_count * self.transparency.genes_per_triangle()
    }
}

/// Convenience wrapper for [`GenomeConfig::dim`].
pub fn genome_dim(config: &GenomeConfig) -> usize {
    config.dim()
}

/// Unconstrained search-space coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for Genome {
    fn from(values: Vec<f64>) -> Self {
        Genome(values)
    }
}

/// A triangle in unit-cube coordinates with an RGBA material.
///
/// `alpha` is the probability that an interaction with the surface is
/// Lambertian; the remainder is thin BK7 glass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triangle {
    pub v1: [f64; 3],
    pub v2: [f64; 3],
    pub v3: [f64; 3],
    pub color: [f64; 3],
    pub alpha: f64,
}

impl Triangle {
    /// Flat view of the 13 scene-space components in gene order.
    pub fn components(&self) -> [f64; 13] {
        let mut out = [0.0; 13];
        out[0..3].copy_from_slice(&self.v1);
        out[3..6].copy_from_slice(&self.v2);
        out[6..9].copy_from_slice(&self.v3);
        out[9..12].copy_from_slice(&self.color);
        out[12] = self.alpha;
        out
    }

    pub fn from_components(c: &[f64; 13]) -> Self {
        Triangle {
            v1: [c[0], c[1], c[2]],
            v2: [c[3], c[4], c[5]],
            v3: [c[6], c[7], c[8]],
            color: [c[9], c[10], c[11]],
            alpha: c[12],
        }
    }

    /// Checks that every component is finite and lies in `[0, 1]`.
    pub fn validate(&self, triangle: usize) -> Result<(), GenomeError> {
        for (i, value) in self.components().into_iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(GenomeError::OutOfRange {
                    triangle,
                    field: COMPONENT_NAMES[i],
                    value,
                });
            }
        }
        Ok(())
    }
}

const COMPONENT_NAMES: [&str; 13] = [
    "v1.x", "v1.y", "v1.z", "v2.x", "v2.y", "v2.z", "v3.x", "v3.y", "v3.z", "color.r", "color.g",
    "color.b", "alpha",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub triangles: Vec<Triangle>,
}

impl Scene {
    pub fn new(triangles: Vec<Triangle>) -> Self {
        Scene { triangles }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        self.triangles
            .iter()
            .enumerate()
            .try_for_each(|(i, t)| t.validate(i))
    }
}

/// Logistic squashing, evaluated so that neither branch overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`] on `(0, 1)`.
#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub fn decode(genome: &Genome, config: &GenomeConfig) -> Result<Scene, GenomeError> {
    let expected = config.dim();
    if genome.len() != expected {
        return Err(GenomeError::LengthMismatch {
            expected,
            actual: genome.len(),
        });
    }
    if let Some((index, &value)) = genome.0.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(GenomeError::NonFinite { index, value });
    }
    let per = config.transparency.genes_per_triangle();
    let triangles = genome
        .0
        .chunks_exact(per)
        .map(|block| {
            let mut c = [0.0; 13];
            for (dst, &g) in c.iter_mut().zip(block) {
                *dst = sigmoid(g);
            }
            if let TransparencyMode::Fixed(alpha) = config.transparency {
                c[12] = alpha;
            }
            Triangle::from_components(&c)
        })
        .collect();
    Ok(Scene { triangles })
}

/// Result of [`encode`]: the genome plus the number of components that sat
/// on the boundary of `[0, 1]` and had to be pulled inward.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub genome: Genome,
    pub clamped: usize,
}

pub fn encode(scene: &Scene, config: &GenomeConfig) -> Result<Encoded, GenomeError> {
    if scene.len() != config.triangle_count {
        return Err(GenomeError::TriangleCount {
            expected: config.triangle_count,
            actual: scene.len(),
        });
    }
    scene.validate()?;
    let per = config.transparency.genes_per_triangle();
    let mut genes = Vec::with_capacity(config.dim());
    let mut clamped = 0;
    for tri in &scene.triangles {
        for &p in &tri.components()[..per] {
            let q = p.clamp(ENCODE_CLAMP, 1.0 - ENCODE_CLAMP);
            if q != p {
                clamped += 1;
            }
            genes.push(logit(q));
        }
    }
    Ok(Encoded {
        genome: Genome(genes),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn learnable(n: usize) -> GenomeConfig {
        GenomeConfig::new(n, TransparencyMode::Learnable).unwrap()
    }

    #[test]
    fn dimension_by_mode() {
        assert_eq!(genome_dim(&learnable(10)), 130);
        assert_eq!(
            genome_dim(&GenomeConfig::new(1, TransparencyMode::Fixed(0.5)).unwrap()),
            12
        );
        assert_eq!(genome_dim(&learnable(100)), 1300);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert_eq!(
            GenomeConfig::new(0, TransparencyMode::Learnable),
            Err(GenomeError::EmptyConfig)
        );
        assert_eq!(
            GenomeConfig::new(3, TransparencyMode::Fixed(1.5)),
            Err(GenomeError::InvalidAlpha(1.5))
        );
    }

    #[test]
    fn zero_genome_decodes_to_cube_center() {
        let scene = decode(&Genome(vec![0.0; 13]), &learnable(1)).unwrap();
        let t = scene.triangles[0];
        assert_eq!(t.components(), [0.5; 13]);
    }

    #[test]
    fn saturated_fixed_genome() {
        let config = GenomeConfig::new(1, TransparencyMode::Fixed(0.5)).unwrap();
        let scene = decode(&Genome(vec![20.0; 12]), &config).unwrap();
        let c = scene.triangles[0].components();
        for v in &c[..12] {
            assert!((v - 1.0).abs() < 1e-8);
        }
        assert_eq!(c[12], 0.5);
    }

    #[test]
    fn decode_errors() {
        let config = learnable(1);
        assert_eq!(
            decode(&Genome(vec![0.0; 12]), &config),
            Err(GenomeError::LengthMismatch {
                expected: 13,
                actual: 12
            })
        );
        let mut g = vec![0.0; 13];
        g[4] = f64::NAN;
        assert!(matches!(
            decode(&Genome(g), &config),
            Err(GenomeError::NonFinite { index: 4, .. })
        ));
    }

    #[test]
    fn encode_examples() {
        let scene = Scene::new(vec![Triangle::from_components(&[0.5; 13])]);
        let enc = encode(&scene, &learnable(1)).unwrap();
        assert_eq!(enc.genome.0, vec![0.0; 13]);
        assert_eq!(enc.clamped, 0);

        let p = 1.0 / (1.0 + (-2.0f64).exp());
        let scene = Scene::new(vec![Triangle::from_components(&[p; 13])]);
        let enc = encode(&scene, &learnable(1)).unwrap();
        for g in enc.genome.0 {
            assert!((g - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_clamps_boundary_values() {
        let mut c = [0.5; 13];
        c[0] = 0.0;
        c[11] = 1.0;
        let scene = Scene::new(vec![Triangle::from_components(&c)]);
        let enc = encode(&scene, &learnable(1)).unwrap();
        assert_eq!(enc.clamped, 2);
        assert!(enc.genome.0.iter().all(|g| g.is_finite()));
        let back = decode(&enc.genome, &learnable(1)).unwrap();
        assert!(back.triangles[0].v1[0] <= 2e-9);
    }

    #[test]
    fn encode_rejects_invalid_scene() {
        let mut c = [0.5; 13];
        c[5] = 1.2;
        let scene = Scene::new(vec![Triangle::from_components(&c)]);
        assert!(matches!(
            encode(&scene, &learnable(1)),
            Err(GenomeError::OutOfRange { field: "v2.z", .. })
        ));
        assert!(matches!(
            encode(&scene, &learnable(2)),
            Err(GenomeError::TriangleCount { .. })
        ));
    }

    #[test]
    fn fixed_mode_ignores_scene_alpha_on_encode() {
        let config = GenomeConfig::new(1, TransparencyMode::Fixed(0.25)).unwrap();
        let mut c = [0.3; 13];
        c[12] = 0.9;
        let scene = Scene::new(vec![Triangle::from_components(&c)]);
        let enc = encode(&scene, &config).unwrap();
        assert_eq!(enc.genome.len(), 12);
        assert_eq!(
            decode(&enc.genome, &config).unwrap().triangles[0].alpha,
            0.25
        );
    }

    fn genes(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-15.0f64..15.0, len)
    }

    proptest! {
        #[test]
        fn decode_is_always_valid(g in genes(26)) {
            let scene = decode(&Genome(g), &learnable(2)).unwrap();
            prop_assert!(scene.validate().is_ok());
        }

        #[test]
        fn decode_encode_decode_is_stable(g in genes(26)) {
            let config = learnable(2);
            let first = decode(&Genome(g), &config).unwrap();
            let second = decode(&encode(&first, &config).unwrap().genome, &config).unwrap();
            for (a, b) in first.triangles.iter().zip(&second.triangles) {
                for (x, y) in a.components().iter().zip(b.components()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn block_permutation_permutes_triangles(g in genes(39)) {
            let config = learnable(3);
            let scene = decode(&Genome(g.clone()), &config).unwrap();
            let mut swapped = g[26..39].to_vec();
            swapped.extend_from_slice(&g[13..26]);
            swapped.extend_from_slice(&g[0..13]);
            let rev = decode(&Genome(swapped), &config).unwrap();
            let mut expect = scene.triangles.clone();
            expect.reverse();
            prop_assert_eq!(rev.triangles, expect);
        }

        #[test]
        fn fixed_alpha_is_constant(g in genes(36)) {
            let config = GenomeConfig::new(3, TransparencyMode::Fixed(0.5)).unwrap();
            let scene = decode(&Genome(g), &config).unwrap();
            prop_assert!(scene.triangles.iter().all(|t| t.alpha == 0.5));
        }
    }
}
