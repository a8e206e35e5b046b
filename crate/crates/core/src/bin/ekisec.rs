use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ekisec::harness::{self, ExperimentConfig, ModelConfig, SubspaceCase, TruthSource};
use ekisec::models;
use ekisec::Error;

#[derive(Parser)]
#[command(name = "ekisec", version, about = "Ensemble Kalman inversion with sampling error correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `run.rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the ensemble sweep.
        #[arg(long)]
        threads: Option<usize>,
        /// PGM image used as the truth of a deblurring experiment.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    #[command(subcommand)]
    Diagnose(Diagnose),
    #[command(subcommand)]
    Presets(Presets),
}

#[derive(Subcommand)]
enum Diagnose {
    /// Monte-Carlo standard deviation of a sample correlation.
    CorrelationStddev {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 2021)]
        seed: u64,
    },
    /// Check whether one corrected update leaves the ensemble span.
    Subspace {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Use the initial ensemble of this config instead of the built-in example.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum Presets {
    List,
    /// Print a preset as a config file.
    Show { name: String },
}

fn run(cli: Cli) -> ekisec::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            image,
        } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
            }
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            if let Some(s) = seed {
                cfg.run.rng_seed = s;
            }
            if let Some(path) = image {
                let img = models::load_pgm(&path)?;
                match &mut cfg.model {
                    ModelConfig::GaussianBlur(spec) => {
                        spec.image_height = img.height;
                        spec.image_width = img.width;
                    }
                    _ => return Err(Error::config("model", "--image needs a gaussian_blur model")),
                }
                cfg.truth = TruthSource::File(path);
                cfg.validate()?;
            }
            let outcome = harness::run_experiment(&cfg)?;
            let last = outcome.record.last();
            println!(
                "iterations={} l1_error={} data_misfit={:.6e}",
                last.iteration,
                last.l1_error.map_or("n/a".to_string(), |e| format!("{e:.6e}")),
                last.data_misfit
            );
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
        }
        Command::Diagnose(Diagnose::CorrelationStddev { r, k, trials, seed }) => {
            let sd = harness::correlation_sampling_stddev(r, k, trials, seed)?;
            let reference = (1.0 - r * r) / ((k - 1) as f64).sqrt();
            println!("r={r} K={k} trials={trials} stddev={sd:.6} asymptotic={reference:.6}");
        }
        Command::Diagnose(Diagnose::Subspace { a, config, tol }) => {
            let case = match config {
                Some(p) => SubspaceCase::from_config(&ExperimentConfig::load(p)?)?,
                None => SubspaceCase::worked_example(),
            };
            let report = harness::check_subspace_violation(&case, a, tol)?;
            println!("case={} a={a} tol={tol}", case.name);
            for (k, (res, rel)) in report.residuals.iter().zip(&report.relative).enumerate() {
                println!("member {}: residual={res:.3e} relative={rel:.3e} in_span={}", k + 1, report.in_span[k]);
            }
            println!("{}", if report.all_in_span() { "in span" } else { "left span" });
        }
        Command::Presets(Presets::List) => {
            for name in harness::PRESET_NAMES {
                println!("{name:<20} {}", harness::preset_summary(name));
            }
        }
        Command::Presets(Presets::Show { name }) => println!("{}", harness::preset(&name)?.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
