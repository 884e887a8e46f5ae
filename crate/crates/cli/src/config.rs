//! Run configuration file.
//!
//! One JSON document fully determines a run. Relative paths inside it are
//! resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use triart_core::fitness::{view_settings, Target, ViewSpec};
use triart_core::genome::{GenomeConfig, TransparencyMode};
use triart_core::render::{render, Camera, Film, RenderSettings};
use triart_core::scene_file::load_scene;

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub genome: GenomeConfig,
    pub views: Vec<ViewConfig>,
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub cma: CmaSettings,
    #[serde(default)]
    pub render: RenderSettings,
    pub output_dir: PathBuf,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    /// Evaluation threads; defaults to the machine's parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub export: ExportSettings,
}

fn default_checkpoint_every() -> u64 {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    /// Keys the view's render seed. Defaults to the view's position in the list.
    #[serde(default)]
    pub id: Option<u64>,
    pub camera: Camera,
    #[serde(flatten)]
    pub target: TargetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    Prompt(String),
    /// PNG compared pixel-wise against the film.
    ReferencePng(PathBuf),
    /// Scene file rendered with this view's camera and seed to make the reference.
    ReferenceScene(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerConfig {
    Embedding { service_url: String },
    TargetImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaSettings {
    pub population_size: usize,
    pub generations: u64,
    pub initial_step_size: f64,
    pub seed: u64,
}

impl Default for CmaSettings {
    fn default() -> Self {
        CmaSettings {
            population_size: 128,
            generations: 1200,
            initial_step_size: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSettings {
    pub film_pngs: bool,
    pub scene_json: bool,
    pub turntable_frames: u32,
}

impl Default for ExportSettings {
    fn default() -> Self {
        ExportSettings {
            film_pngs: true,
            scene_json: true,
            turntable_frames: 0,
        }
    }
}

impl RunConfig {
    /// Four side cameras, 50 triangles with learnable alpha, λ = 128 and
    /// 1200 generations, every camera paired with `prompt`.
    pub fn full_scale(prompt: &str, service_url: &str) -> Self {
        RunConfig {
            genome: GenomeConfig {
                triangle_count: 50,
                transparency: TransparencyMode::Learnable,
            },
            views: Camera::side_views(224, 224)
                .into_iter()
                .map(|camera| ViewConfig {
                    id: None,
                    camera,
                    target: TargetConfig::Prompt(prompt.to_string()),
                })
                .collect(),
            scorer: ScorerConfig::Embedding {
                service_url: service_url.to_string(),
            },
            cma: CmaSettings::default(),
            render: RenderSettings::default(),
            output_dir: PathBuf::from("runs/default"),
            checkpoint_every: default_checkpoint_every(),
            workers: None,
            export: ExportSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            RunError::Config(format!("field `{field}`: {}", e.into_inner()))
        })
    }

    /// Reads a config and makes its relative paths absolute with respect to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut config = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for view in &mut self.views {
            match &mut view.target {
                TargetConfig::ReferencePng(p) | TargetConfig::ReferenceScene(p) => fix(p),
                TargetConfig::Prompt(_) => {}
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialise")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        self.genome
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        if self.views.is_empty() {
            return bad("at least one view is required".into());
        }
        if self.cma.generations == 0 {
            return bad("cma.generations must be at least 1".into());
        }
        if self.cma.population_size < 2 {
            return bad("cma.population_size must be at least 2".into());
        }
        if !(self.cma.initial_step_size > 0.0 && self.cma.initial_step_size.is_finite()) {
            return bad("cma.initial_step_size must be positive".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.render
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        let mut ids = std::collections::HashSet::new();
        for (i, view) in self.views.iter().enumerate() {
            view.camera
                .validate()
                .map_err(|e| RunError::Config(format!("views[{i}]: {e}")))?;
            if !ids.insert(view.id.unwrap_or(i as u64)) {
                return bad(format!("views[{i}]: duplicate view id"));
            }
            match (&view.target, &self.scorer) {
                (TargetConfig::Prompt(p), _) if p.is_empty() => {
                    return bad(format!("views[{i}]: empty prompt"));
                }
                (TargetConfig::Prompt(_), ScorerConfig::TargetImage) => {
                    return bad(format!(
                        "views[{i}]: the target_image scorer needs a reference image, not a prompt"
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// `(view id, camera)` for every view.
    pub fn view_cameras(&self) -> Vec<(u64, Camera)> {
        self.views
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.unwrap_or(i as u64), v.camera))
            .collect()
    }

    /// Builds the view list, loading or rendering reference images.
    pub fn resolve_views(&self) -> Result<Vec<ViewSpec>, RunError> {
        self.views
            .iter()
            .enumerate()
            .map(|(i, view)| {
                let id = view.id.unwrap_or(i as u64);
                let target = match &view.target {
                    TargetConfig::Prompt(p) => Target::TextPrompt(p.clone()),
                    TargetConfig::ReferencePng(path) => {
                        let film = Film::load_png(path)
                            .map_err(|e| RunError::Config(format!("views[{i}]: {e}")))?;
                        if (film.width, film.height) != (view.camera.width, view.camera.height) {
                            return Err(RunError::Config(format!(
                                "views[{i}]: reference is {}x{}, camera is {}x{}",
                                film.width, film.height, view.camera.width, view.camera.height
                            )));
                        }
                        Target::ReferenceImage(film)
                    }
                    TargetConfig::ReferenceScene(path) => {
                        let scene = load_scene(path)
                            .map_err(|e| RunError::Config(format!("views[{i}]: {e}")))?;
                        Target::ReferenceImage(render(
                            &scene,
                            &view.camera,
                            &view_settings(&self.render, id),
                        ))
                    }
                };
                Ok(ViewSpec {
                    id,
                    camera: view.camera,
                    target,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_shape() {
        let c = RunConfig::full_scale("a vivid, colorful bird", "http://localhost:8000");
        c.validate().unwrap();
        assert_eq!(c.views.len(), 4);
        assert_eq!(c.cma.population_size, 128);
        assert_eq!(c.cma.generations, 1200);
        assert_eq!(c.genome.triangle_count, 50);
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig::full_scale("an annoyed cat", "http://localhost:8000");
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn parses_minimal_document() {
        let text = r#"{
            "genome": {"triangle_count": 5, "transparency": {"fixed": 0.5}},
            "views": [
                {"camera": {"position": [0.5, 0.5, -1.7], "look_at": [0.5, 0.5, 0.5], "width": 32, "height": 32},
                 "reference_png": "target.png"}
            ],
            "scorer": {"kind": "target_image"},
            "output_dir": "out"
        }"#;
        let mut c = RunConfig::from_json(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.genome.transparency, TransparencyMode::Fixed(0.5));
        assert_eq!(c.views[0].camera.vertical_fov, 45.0);
        c.resolve_paths(Path::new("/tmp/cfg"));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/cfg/out"));
        assert_eq!(
            c.views[0].target,
            TargetConfig::ReferencePng(PathBuf::from("/tmp/cfg/target.png"))
        );
    }

    #[test]
    fn errors_name_the_field() {
        let text = r#"{"genome": {"triangle_count": "many", "transparency": "learnable"}}"#;
        let err = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(err.contains("genome.triangle_count"), "{err}");
    }

    #[test]
    fn validation_failures() {
        let base = RunConfig::full_scale("x", "http://localhost:1");
        let mut c = base.clone();
        c.cma.generations = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.cma.population_size = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.views.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.scorer = ScorerConfig::TargetImage;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.views[1].id = Some(0);
        assert!(c.validate().is_err());
        let mut c = base;
        c.views[0].target = TargetConfig::Prompt(String::new());
        assert!(c.validate().is_err());
    }
}
