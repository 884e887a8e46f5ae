//! Turning a genome into a scalar fitness.
//!
//! Each [`ViewSpec`] pairs a camera with a target. A genome is decoded,
//! rendered from every view and each film is scored against its target by
//! a [`Scorer`]; the fitness is the mean of the per-view distances.

mod client;

use std::collections::HashMap;
use std::sync::RwLock;

use thiserror::Error;

pub use client::{EmbeddingClient, HealthInfo, RetryPolicy};

use crate::genome::{decode, Genome, GenomeConfig, GenomeError, Scene};
use crate::render::{render_with, Camera, Film, PreparedScene, RenderOptions, RenderSettings};
use crate::seed::derive_seed;

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FitnessError {
    #[error("vectors have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("film is {actual:?}, reference is {expected:?}")]
    FilmSizeMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("embedding norm {0} is not 1")]
    NotUnitNorm(f64),
    #[error("empty embedding")]
    EmptyEmbedding,
    #[error("text prompt is empty")]
    EmptyPrompt,
    #[error("no views to evaluate")]
    NoViews,
    #[error("{scorer} scorer cannot handle a {target} target")]
    UnsupportedTarget {
        scorer: &'static str,
        target: &'static str,
    },
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error("{url} unreachable after {attempts} attempts: {message}")]
    Unreachable {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("embedding service returned {status}: {body}")]
    Service { status: u16, body: String },
    #[error("embedding protocol error: {0}")]
    Protocol(String),
}

/// Unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, FitnessError> {
        if values.is_empty() {
            return Err(FitnessError::EmptyEmbedding);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(FitnessError::NotUnitNorm(norm));
        }
        Ok(EmbeddingVector(values))
    }

    /// Scales `values` to unit length.
    pub fn normalized(values: Vec<f64>) -> Result<Self, FitnessError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(FitnessError::NotUnitNorm(norm));
        }
        EmbeddingVector::new(values.into_iter().map(|v| v / norm).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// `1 − ⟨a, b⟩`, in `[0, 2]`.
pub fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, FitnessError> {
    if a.dim() != b.dim() {
        return Err(FitnessError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot).clamp(0.0, 2.0))
}

/// Mean squared error between the tonemapped films, normalised to `[0, 1]`.
pub fn target_image_score(film: &Film, reference: &Film) -> Result<f64, FitnessError> {
    if (film.width, film.height) != (reference.width, reference.height) {
        return Err(FitnessError::FilmSizeMismatch {
            expected: (reference.width, reference.height),
            actual: (film.width, film.height),
        });
    }
    let a = film.tonemap();
    let b = reference.tonemap();
    let sum: f64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| {
            let d = (x as f64 - y as f64) / 255.0;
            d * d
        })
        .sum();
    Ok(sum / a.as_raw().len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    TextPrompt(String),
    ReferenceImage(Film),
}

impl Target {
    fn kind(&self) -> &'static str {
        match self {
            Target::TextPrompt(_) => "text prompt",
            Target::ReferenceImage(_) => "reference image",
        }
    }
}

/// One camera and what its film should look like.
///
/// `id` keys the view's render seed, so reordering views does not change
/// any view's distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    pub id: u64,
    pub camera: Camera,
    pub target: Target,
}

impl ViewSpec {
    pub fn validate(&self) -> Result<(), FitnessError> {
        match &self.target {
            Target::TextPrompt(p) if p.is_empty() => Err(FitnessError::EmptyPrompt),
            _ => Ok(()),
        }
    }
}

/// Render settings for view `view_id`: the run's settings with a seed
/// derived from the run seed and the view id.
pub fn view_settings(settings: &RenderSettings, view_id: u64) -> RenderSettings {
    RenderSettings {
        seed: derive_seed(settings.seed, view_id),
        ..*settings
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    /// Mean of the per-view distances.
    pub total: f64,
    /// `(view id, distance)` in the order the views were given.
    pub per_view: Vec<(u64, f64)>,
}

pub trait Scorer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Distance between `film` and `target`; lower is better.
    fn distance(&self, film: &Film, target: &Target) -> Result<f64, FitnessError>;
}

/// Offline scorer comparing films pixel-wise against reference images.
#[derive(Debug, Clone, Copy, Default)]
pub struct TargetImageScorer;

impl Scorer for TargetImageScorer {
    fn name(&self) -> &'static str {
        "target-image"
    }

    fn distance(&self, film: &Film, target: &Target) -> Result<f64, FitnessError> {
        match target {
            Target::ReferenceImage(reference) => target_image_score(film, reference),
            other => Err(FitnessError::UnsupportedTarget {
                scorer: self.name(),
                target: other.kind(),
            }),
        }
    }
}

/// Cosine distance between service embeddings of the film and the target.
///
/// Text embeddings are cached by exact prompt for the scorer's lifetime.
#[derive(Debug)]
pub struct EmbeddingScorer {
    client: EmbeddingClient,
    text_cache: RwLock<HashMap<String, EmbeddingVector>>,
}

impl EmbeddingScorer {
    pub fn new(client: EmbeddingClient) -> Self {
        EmbeddingScorer {
            client,
            text_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn client(&self) -> &EmbeddingClient {
        &self.client
    }

    pub fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector, FitnessError> {
        if let Some(v) = self.text_cache.read().unwrap().get(prompt) {
            return Ok(v.clone());
        }
        let v = self.client.embed_text(prompt)?;
        Ok(self
            .text_cache
            .write()
            .unwrap()
            .entry(prompt.to_string())
            .or_insert(v)
            .clone())
    }

    pub fn cached_prompts(&self) -> usize {
        self.text_cache.read().unwrap().len()
    }
}

impl Scorer for EmbeddingScorer {
    fn name(&self) -> &'static str {
        "embedding"
    }

    fn distance(&self, film: &Film, target: &Target) -> Result<f64, FitnessError> {
        let target = match target {
            Target::TextPrompt(p) => self.embed_text(p)?,
            Target::ReferenceImage(reference) => self.client.embed_image(reference)?,
        };
        let image = self.client.embed_image(film)?;
        cosine_distance(&image, &target)
    }
}

/// Renders `scene` from every view with its per-view seed.
pub fn render_views(scene: &Scene, views: &[ViewSpec], settings: &RenderSettings) -> Vec<Film> {
    let prepared = PreparedScene::new(scene);
    views
        .iter()
        .map(|v| {
            render_with(
                &prepared,
                &v.camera,
                &view_settings(settings, v.id),
                RenderOptions::default(),
            )
        })
        .collect()
}

pub fn evaluate_scene(
    scene: &Scene,
    views: &[ViewSpec],
    scorer: &dyn Scorer,
    settings: &RenderSettings,
) -> Result<FitnessReport, FitnessError> {
    if views.is_empty() {
        return Err(FitnessError::NoViews);
    }
    let films = render_views(scene, views, settings);
    let per_view = views
        .iter()
        .zip(&films)
        .map(|(v, film)| Ok((v.id, scorer.distance(film, &v.target)?)))
        .collect::<Result<Vec<_>, FitnessError>>()?;
    let total = per_view.iter().map(|(_, d)| d).sum::<f64>() / per_view.len() as f64;
    Ok(FitnessReport { total, per_view })
}

pub fn evaluate(
    genome: &Genome,
    config: &GenomeConfig,
    views: &[ViewSpec],
    scorer: &dyn Scorer,
    settings: &RenderSettings,
) -> Result<FitnessReport, FitnessError> {
    let scene = decode(genome, config)?;
    evaluate_scene(&scene, views, scorer, settings)
}
