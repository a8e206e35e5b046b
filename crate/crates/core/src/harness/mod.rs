//! Experiment runner: builds a problem from an [`ExperimentConfig`], runs
//! plain or lp-regularized EKI, and persists metrics and estimates.

pub mod config;
pub mod diagnostics;
pub mod metrics;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;

pub use config::{preset, preset_summary, ExperimentConfig, ExperimentKind, ModelConfig, TruthSource, PRESET_NAMES};
pub use diagnostics::{check_subspace_violation, correlation_sampling_stddev, SubspaceCase};
pub use metrics::{emit_metrics, emit_plot_script, emit_vector, metrics_csv, METRICS_HEADER};

use crate::eki::{self, ForwardModel, MeasurementModel, RunConfig, RunRecord};
use crate::error::{Error, Result};
use crate::lp::{self, RegularizationConfig};
use crate::models::{self, ImageBuffer, Lorenz96Spec};
use crate::rng::{self, Purpose};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Four nonzero entries at seeded positions: three of magnitude in
/// `[0.5, 2]` and one of magnitude 0.1, with random signs.
pub fn sparse_truth(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = rng::stream(seed, Purpose::Truth, 0, 0);
    let mut u = DVector::zeros(n);
    let positions = index::sample(&mut rng, n, 4.min(n));
    for (slot, pos) in positions.iter().enumerate() {
        let magnitude = if slot < 3 { rng.random_range(0.5..2.0) } else { 0.1 };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        u[pos] = sign * magnitude;
    }
    u
}

/// Piecewise-constant test scene: a bright rectangle, a mid-grey disc and a
/// dark bar on a low background, placed with small seeded offsets.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> ImageBuffer {
    let mut rng = rng::stream(seed, Purpose::Truth, 0, 0);
    let jitter = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(-0.05..0.05);
    let (rx, ry) = (0.15 + jitter(&mut rng), 0.2 + jitter(&mut rng));
    let (cx, cy) = (0.68 + jitter(&mut rng), 0.62 + jitter(&mut rng));
    let bar_y = 0.78 + jitter(&mut rng);
    let mut pixels = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let y = (r as f64 + 0.5) / height as f64;
            let x = (c as f64 + 0.5) / width as f64;
            let mut v = 0.15;
            if (rx..rx + 0.35).contains(&x) && (ry..ry + 0.3).contains(&y) {
                v = 0.9;
            }
            if (x - cx).powi(2) + (y - cy).powi(2) < 0.18f64.powi(2) {
                v = 0.55;
            }
            if (0.1..0.5).contains(&x) && (bar_y..bar_y + 0.08).contains(&y) {
                v = 0.0;
            }
            pixels.push(v);
        }
    }
    ImageBuffer {
        height,
        width,
        pixels,
    }
}

/// State on the attractor: a seeded perturbation of the equilibrium
/// integrated for ten time units.
pub fn lorenz96_truth(spec: &Lorenz96Spec, seed: u64) -> Result<DVector<f64>> {
    let mut rng = rng::stream(seed, Purpose::Truth, 0, 0);
    let z = rng::standard_normals(&mut rng, spec.n_state);
    let x0 = DVector::from_iterator(spec.n_state, z.iter().map(|v| spec.forcing + v));
    let spin_up = Lorenz96Spec {
        t_final: 10.0,
        ..spec.clone()
    };
    models::lorenz96_rk4(&x0, &spin_up)
}

/// Log-permeability 1 on the square `[0.3, 0.7]^2`, 0 elsewhere.
pub fn square_inclusion(resolution: usize) -> DVector<f64> {
    let h = 1.0 / resolution as f64;
    DVector::from_fn(resolution * resolution, |m, _| {
        let x = ((m % resolution) as f64 + 0.5) * h;
        let y = ((m / resolution) as f64 + 0.5) * h;
        if (0.3..=0.7).contains(&x) && (0.3..=0.7).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
}

/// Peak signal-to-noise ratio in dB for intensities with peak 1.
pub fn psnr(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let mse = (estimate - truth).norm_squared() / truth.len() as f64;
    10.0 * (1.0 / mse).log10()
}

fn read_vector_file(path: &Path) -> Result<DVector<f64>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        return Ok(models::load_pgm(path)?.flatten());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut offset = 0;
    for token in text.split(|c: char| c == ',' || c.is_whitespace()) {
        if !token.is_empty() {
            values.push(token.parse::<f64>().map_err(|e| Error::Parse {
                offset,
                message: format!("{}: bad number {token:?}: {e}", path.display()),
            })?);
        }
        offset += token.len() + 1;
    }
    Ok(DVector::from_vec(values))
}

fn generate_truth(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<DVector<f64>> {
    Ok(match &cfg.model {
        ModelConfig::Identity { .. } => DVector::from_element(n, 1.0),
        ModelConfig::GaussianMatrix { .. } | ModelConfig::Matrix { .. } => sparse_truth(n, seed),
        ModelConfig::GaussianBlur(s) => synthetic_image(s.image_height, s.image_width, seed).flatten(),
        ModelConfig::Lorenz96(s) => lorenz96_truth(s, seed)?,
        ModelConfig::Darcy(s) => square_inclusion(s.resolution),
    })
}

/// Everything needed to run one configured experiment.
pub struct Experiment {
    pub model: Box<dyn ForwardModel + Send>,
    pub truth: DVector<f64>,
    pub measurement: MeasurementModel,
    pub run: RunConfig,
    pub reg: Option<RegularizationConfig>,
}

impl Experiment {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.model.build()?;
        let n = model.input_dim();
        let truth = match &cfg.truth {
            TruthSource::Inline(v) => DVector::from_column_slice(v),
            TruthSource::File(p) => read_vector_file(p)?,
            TruthSource::Generated { seed } => generate_truth(cfg, n, *seed)?,
        };
        if truth.len() != n {
            return Err(Error::config(
                "truth",
                format!("has {} entries but the model takes {n}", truth.len()),
            ));
        }
        let mut y = model.evaluate(&truth).map_err(|e| e.with_context("evaluating the truth"))?;
        let gamma_diag = DVector::from_element(y.len(), cfg.measurement.variance);
        let clean = MeasurementModel::diagonal(y.clone(), &gamma_diag)?;
        if cfg.measurement.noisy {
            let mut rng = rng::stream(cfg.run.rng_seed, Purpose::MeasurementNoise, 0, 0);
            y += clean.sample_noise(&mut rng);
        }
        let measurement = MeasurementModel::diagonal(y, &gamma_diag)?;
        let run = cfg.run_config(n, &truth)?;
        Ok(Experiment {
            model,
            truth,
            measurement,
            run,
            reg: cfg.reg,
        })
    }

    pub fn execute(&self) -> Result<RunRecord> {
        let model = self.model.as_ref();
        match self.reg {
            Some(reg) => lp::lp_run(model, &self.measurement, reg, &self.run, Some(&self.truth)),
            None => eki::run(model, &self.measurement, &self.run, Some(&self.truth)),
        }
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub record: RunRecord,
    pub truth: DVector<f64>,
    pub data: DVector<f64>,
    pub written: Vec<PathBuf>,
}

/// Prepares, runs and (when `output_dir` is set) persists an experiment.
///
/// Writes `metrics.csv`, `estimate.csv`, `plot_metrics.py` and, for image
/// experiments, `truth.pgm`, `measurement.pgm` and `estimate.pgm`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let exp = Experiment::prepare(cfg)?;
    let record = exp
        .execute()
        .map_err(|e| e.with_context(format!("{:?} experiment", cfg.experiment)))?;
    let mut written = Vec::new();
    if let Some(dir) = &cfg.output_dir {
        let metrics_path = dir.join("metrics.csv");
        emit_metrics(&record, &metrics_path)?;
        written.push(metrics_path);
        let estimate_path = dir.join("estimate.csv");
        emit_vector(record.estimate(), &estimate_path)?;
        written.push(estimate_path);
        let script = dir.join("plot_metrics.py");
        emit_plot_script(&script)?;
        written.push(script);
        if let ModelConfig::GaussianBlur(spec) = &cfg.model {
            let (h, w) = (spec.image_height, spec.image_width);
            for (name, v) in [
                ("truth.pgm", &exp.truth),
                ("measurement.pgm", exp.measurement.y()),
                ("estimate.pgm", record.estimate()),
            ] {
                let path = dir.join(name);
                models::save_pgm(&ImageBuffer::from_vector(h, w, v)?, &path)?;
                written.push(path);
            }
        }
    }
    Ok(ExperimentOutcome {
        record,
        truth: exp.truth,
        data: exp.measurement.y().clone(),
        written,
    })
}
