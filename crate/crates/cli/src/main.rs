use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use triart::{rerender, run_with, RunConfig, RunError, RunOptions};

#[derive(Parser)]
#[command(
    version,
    about = "Evolve scenes of semi-transparent triangles with CMA-ES"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evolution described by a JSON config file.
    Run {
        config: PathBuf,
        /// Continue from a checkpoint_<g>.json written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the CMA-ES sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this generation (a checkpoint is written for it).
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Re-render a saved scene with the views of a config.
    Rerender {
        scene: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        spp: Option<u32>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Suffix of the written files: view<i>_<label>.png
        #[arg(long, default_value = "rerender")]
        label: String,
    },
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run {
            config,
            resume,
            output_dir,
            seed,
            stop_after,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                config.output_dir = dir;
            }
            if let Some(seed) = seed {
                config.cma.seed = seed;
            }
            let summary = run_with(&config, &RunOptions { resume, stop_after })?;
            println!(
                "best fitness {:e} after {} generations in {:.1?}{}; output in {}",
                summary.best_fitness,
                summary.generations,
                summary.wall_time,
                if summary.interrupted {
                    " (stopped early)"
                } else {
                    ""
                },
                summary.output_dir.display()
            );
            Ok(())
        }
        Command::Rerender {
            scene,
            config,
            spp,
            width,
            height,
            output_dir,
            label,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(spp) = spp {
                config.render.samples_per_pixel = spp;
            }
            for view in &mut config.views {
                if let Some(w) = width {
                    view.camera.width = w;
                }
                if let Some(h) = height {
                    view.camera.height = h;
                }
                view.camera
                    .validate()
                    .map_err(|e| RunError::Config(e.to_string()))?;
            }
            config
                .render
                .validate()
                .map_err(|e| RunError::Config(e.to_string()))?;
            let views = config.view_cameras();
            let out = output_dir.unwrap_or_else(|| config.output_dir.clone());
            for (path, _) in rerender(&scene, &views, &config.render, &out, &label)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
