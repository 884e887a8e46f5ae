//! The evolution loop: ask → parallel evaluate → tell, with checkpoints.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use triart_core::cmaes::{CmaConfig, CmaState, TellOutcome};
use triart_core::fitness::{
    evaluate, render_views, view_settings, EmbeddingClient, EmbeddingScorer, Scorer,
    TargetImageScorer, ViewSpec,
};
use triart_core::genome::{decode, Genome, GenomeConfig, Scene};
use triart_core::render::{render_with, Camera, Film, PreparedScene, RenderOptions};
use triart_core::scene_file::{load_scene, save_scene};
use triart_core::seed::{derive_seed, stream_rng};
use triart_core::RenderSettings;

use crate::checkpoint::{checkpoint_path, Checkpoint, FORMAT_VERSION};
use crate::config::{RunConfig, ScorerConfig};
use crate::RunError;

pub const TRAJECTORY_FILE: &str = "trajectory.log";

/// Elevation of the turntable orbit, degrees.
const TURNTABLE_ELEVATION: f64 = 20.0;
/// Line radius of the cube wireframe in turntable frames.
const FRAME_RADIUS: f64 = 0.004;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue from this checkpoint instead of starting fresh.
    pub resume: Option<PathBuf>,
    /// Stop (as if interrupted) once this generation has completed. A
    /// checkpoint for it is always written.
    pub stop_after: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub best_fitness: f64,
    pub best_genome: Vec<f64>,
    /// Number of generations completed, counting any before a resume.
    pub generations: u64,
    pub wall_time: Duration,
    pub interrupted: bool,
    pub output_dir: PathBuf,
}

pub fn scene_path(dir: &Path, generation: u64) -> PathBuf {
    dir.join(format!("scene_{generation}.json"))
}

pub fn view_png_path(dir: &Path, view: usize, label: &str) -> PathBuf {
    dir.join(format!("view{view}_{label}.png"))
}

pub fn turntable_path(dir: &Path, frame: u32) -> PathBuf {
    dir.join(format!("turntable_{frame}.png"))
}

fn build_scorer(config: &RunConfig) -> Result<Box<dyn Scorer>, RunError> {
    Ok(match &config.scorer {
        ScorerConfig::TargetImage => Box::new(TargetImageScorer),
        ScorerConfig::Embedding { service_url } => {
            let mut client = EmbeddingClient::new(service_url.clone());
            let health = client.connect().map_err(RunError::Scorer)?;
            log::info!(
                "embedding service {service_url}: model {}, dim {}",
                health.model,
                health.dim
            );
            Box::new(EmbeddingScorer::new(client))
        }
    })
}

struct Trajectory {
    file: File,
    path: PathBuf,
}

impl Trajectory {
    fn create(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(TRAJECTORY_FILE);
        let file = File::create(&path).map_err(|e| RunError::io(&path, e))?;
        Ok(Trajectory { file, path })
    }

    /// Keeps the lines for generations up to `last` and appends after them.
    fn resume(dir: &Path, last: u64) -> Result<Self, RunError> {
        let path = dir.join(TRAJECTORY_FILE);
        let existing = std::fs::read_to_string(&path).unwrap_or_default();
        let kept: String = existing
            .lines()
            .filter(|line| {
                line.split(',')
                    .next()
                    .and_then(|g| g.trim().parse::<u64>().ok())
                    .is_some_and(|g| g <= last)
            })
            .map(|line| format!("{line}\n"))
            .collect();
        std::fs::write(&path, kept).map_err(|e| RunError::io(&path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| RunError::io(&path, e))?;
        Ok(Trajectory { file, path })
    }

    fn push(&mut self, line: &str) -> Result<(), RunError> {
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| RunError::io(&self.path, e))
    }
}

pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    run_with(config, &RunOptions::default())
}

pub fn run_with(config: &RunConfig, options: &RunOptions) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    config.validate()?;
    let out = config.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| RunError::io(&out, e))?;

    let views = config.resolve_views()?;
    let scorer = build_scorer(config)?;
    let dim = config.genome.dim();
    let seed = config.cma.seed;

    let (mut state, first_generation, mut trajectory) = match &options.resume {
        Some(path) => {
            let cp = Checkpoint::load(path)?;
            if cp.genome_dim != dim {
                return Err(RunError::Config(format!(
                    "checkpoint genome dimension {} does not match config ({dim})",
                    cp.genome_dim
                )));
            }
            if cp.seed != seed {
                return Err(RunError::Config(format!(
                    "checkpoint was written with seed {} but the run uses seed {seed}",
                    cp.seed
                )));
            }
            let state = CmaState::restore(&cp.cma).map_err(RunError::Optimizer)?;
            if state.config().population_size != config.cma.population_size {
                return Err(RunError::Config(
                    "checkpoint population size does not match config".into(),
                ));
            }
            log::info!("resuming after generation {}", cp.generation);
            (
                state,
                cp.generation + 1,
                Trajectory::resume(&out, cp.generation)?,
            )
        }
        None => {
            let cma = CmaConfig::new(
                dim,
                config.cma.population_size,
                config.cma.initial_step_size,
            )
            .map_err(|e| RunError::Config(e.to_string()))?;
            let state = CmaState::new(vec![0.0; dim], cma).map_err(RunError::Optimizer)?;
            (state, 0, Trajectory::create(&out)?)
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Config(format!("worker pool: {e}")))?;

    let mut completed = first_generation;
    let mut interrupted = false;
    let mut last_checkpoint = None;
    for generation in first_generation..config.cma.generations {
        let mut rng = stream_rng(seed, generation);
        let population = state.ask(&mut rng).map_err(RunError::Optimizer)?;
        let results: Vec<_> = pool.install(|| {
            population
                .par_iter()
                .map(|x| {
                    evaluate(
                        &Genome(x.clone()),
                        &config.genome,
                        &views,
                        scorer.as_ref(),
                        &config.render,
                    )
                })
                .collect()
        });
        let mut fitnesses = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(report) => fitnesses.push(report.total),
                Err(e) => {
                    log::error!("generation {generation}: scorer failed: {e}");
                    if generation > 0 && last_checkpoint != Some(generation - 1) {
                        write_checkpoint(config, &views, &state, generation - 1, seed)?;
                    }
                    return Err(RunError::Scorer(e));
                }
            }
        }

        let line = match state
            .tell(&population, &fitnesses)
            .map_err(RunError::Optimizer)?
        {
            TellOutcome::Updated(stats) => {
                let mut stats = stats;
                stats.generation = generation;
                stats.log_line()
            }
            TellOutcome::Skipped => format!("{generation}, skipped"),
        };
        trajectory.push(&line)?;
        log::debug!("{line}");
        completed = generation + 1;

        let stop = options.stop_after == Some(generation);
        if (generation + 1) % config.checkpoint_every == 0
            || generation + 1 == config.cma.generations
            || stop
        {
            write_checkpoint(config, &views, &state, generation, seed)?;
            last_checkpoint = Some(generation);
        }
        if stop && generation + 1 < config.cma.generations {
            interrupted = true;
            break;
        }
    }

    let best = state.best().cloned().ok_or_else(|| {
        RunError::Config("no generation was evaluated (resumed past the end?)".into())
    })?;
    if !interrupted && config.export.turntable_frames > 0 {
        let scene = decode(&Genome(best.genome.clone()), &config.genome)
            .map_err(|e| RunError::Config(e.to_string()))?;
        let camera = views[0].camera;
        for (k, film) in turntable(
            &scene,
            &camera,
            &config.render,
            config.export.turntable_frames,
        )
        .into_iter()
        .enumerate()
        {
            let path = turntable_path(&out, k as u32);
            film.save_png(&path)
                .map_err(|e| RunError::Render(e.to_string()))?;
        }
    }

    Ok(RunSummary {
        best_fitness: best.fitness,
        best_genome: best.genome,
        generations: completed,
        wall_time: started.elapsed(),
        interrupted,
        output_dir: out,
    })
}

fn write_checkpoint(
    config: &RunConfig,
    views: &[ViewSpec],
    state: &CmaState,
    generation: u64,
    seed: u64,
) -> Result<(), RunError> {
    let out = &config.output_dir;
    let checkpoint = Checkpoint {
        format_version: FORMAT_VERSION,
        generation,
        seed,
        genome_dim: config.genome.dim(),
        cma: state.snapshot(),
    };
    checkpoint.save(&checkpoint_path(out, generation))?;

    let Some(best) = state.best() else {
        return Ok(());
    };
    let scene = best_scene(&best.genome, &config.genome)?;
    if config.export.scene_json {
        save_scene(&scene, scene_path(out, generation)).map_err(RunError::scene)?;
    }
    if config.export.film_pngs {
        let label = generation.to_string();
        for (i, film) in render_views(&scene, views, &config.render)
            .iter()
            .enumerate()
        {
            film.save_png(view_png_path(out, i, &label))
                .map_err(|e| RunError::Render(e.to_string()))?;
        }
    }
    Ok(())
}

fn best_scene(genome: &[f64], config: &GenomeConfig) -> Result<Scene, RunError> {
    decode(&Genome(genome.to_vec()), config).map_err(|e| RunError::Config(e.to_string()))
}

/// Frames orbiting the cube at equal azimuth steps, with the cube wireframe.
pub fn turntable(
    scene: &Scene,
    like: &Camera,
    settings: &RenderSettings,
    frames: u32,
) -> Vec<Film> {
    let prepared = PreparedScene::new(scene);
    (0..frames)
        .map(|k| {
            let mut camera = Camera::orbit(
                360.0 * k as f64 / frames as f64,
                TURNTABLE_ELEVATION,
                triart_core::render::DEFAULT_CAMERA_DISTANCE,
                like.width,
                like.height,
            );
            camera.vertical_fov = like.vertical_fov;
            let frame_settings = RenderSettings {
                seed: derive_seed(settings.seed, u64::MAX - k as u64),
                ..*settings
            };
            render_with(
                &prepared,
                &camera,
                &frame_settings,
                RenderOptions {
                    serial: false,
                    cube_frame: Some(FRAME_RADIUS),
                },
            )
        })
        .collect()
}

/// Renders a saved scene from every `(view id, camera)` with the views' own
/// seeds and writes `view<i>_<label>.png` into `out`.
pub fn rerender(
    scene_file: &Path,
    views: &[(u64, Camera)],
    settings: &RenderSettings,
    out: &Path,
    label: &str,
) -> Result<Vec<(PathBuf, Film)>, RunError> {
    let scene = load_scene(scene_file).map_err(RunError::scene)?;
    std::fs::create_dir_all(out).map_err(|e| RunError::io(out, e))?;
    let prepared = PreparedScene::new(&scene);
    views
        .iter()
        .enumerate()
        .map(|(i, (id, camera))| {
            let film = render_with(
                &prepared,
                camera,
                &view_settings(settings, *id),
                RenderOptions::default(),
            );
            let path = view_png_path(out, i, label);
            film.save_png(&path)
                .map_err(|e| RunError::Render(e.to_string()))?;
            Ok((path, film))
        })
        .collect()
}
