//! Evolving scenes of semi-transparent triangles.
//!
//! A scene of `N` triangles is encoded as a flat real-valued [`genome`],
//! rendered from one or more cameras by the path tracer in [`render`],
//! scored against text prompts or reference images by [`fitness`] and
//! optimised with the ask/tell CMA-ES in [`cmaes`].

pub mod cmaes;
pub mod fitness;
pub mod genome;
pub mod render;
pub mod scene_file;
pub mod seed;

pub use cmaes::{CmaConfig, CmaError, CmaState};
pub use fitness::{FitnessError, FitnessReport, Scorer, Target, ViewSpec};
pub use genome::{decode, encode, Genome, GenomeConfig, Scene, TransparencyMode, Triangle};
pub use render::{render, Camera, Film, RenderSettings};
