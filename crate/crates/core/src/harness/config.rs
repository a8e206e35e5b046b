//! Experiment configuration files (JSON) and the built-in presets.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eki::{ForwardModel, RunConfig};
use crate::error::{Error, Result};
use crate::lp::RegularizationConfig;
use crate::models::{
    gaussian_filter, identity_model, BlurSpec, DarcyModel, DarcySpec, GaussianBlurModel, LinearModel, Lorenz96Model,
    Lorenz96Spec,
};
use crate::sec::SecConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Toy,
    CompressiveSensing,
    Deblurring,
    Lorenz96,
    Darcy,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Identity { dim: usize },
    GaussianMatrix { rows: usize, cols: usize, seed: u64 },
    Matrix { rows: Vec<Vec<f64>> },
    GaussianBlur(BlurSpec),
    Lorenz96(Lorenz96Spec),
    Darcy(DarcySpec),
}

impl ModelConfig {
    fn name(&self) -> &'static str {
        match self {
            ModelConfig::Identity { .. } => "identity",
            ModelConfig::GaussianMatrix { .. } => "gaussian_matrix",
            ModelConfig::Matrix { .. } => "matrix",
            ModelConfig::GaussianBlur(_) => "gaussian_blur",
            ModelConfig::Lorenz96(_) => "lorenz96",
            ModelConfig::Darcy(_) => "darcy",
        }
    }

    pub fn build(&self) -> Result<Box<dyn ForwardModel + Send>> {
        let wrap = |e: Error| Error::config("model", e.to_string());
        Ok(match self {
            ModelConfig::Identity { dim } => Box::new(identity_model(*dim)),
            ModelConfig::GaussianMatrix { rows, cols, seed } => Box::new(LinearModel::gaussian(*rows, *cols, *seed)),
            ModelConfig::Matrix { rows } => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != cols) || cols == 0 {
                    return Err(Error::config("model.rows", "matrix rows must be nonempty and equally long"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Box::new(LinearModel::new(DMatrix::from_row_slice(rows.len(), cols, &flat)))
            }
            ModelConfig::GaussianBlur(spec) => Box::new(GaussianBlurModel::new(*spec).map_err(wrap)?),
            ModelConfig::Lorenz96(spec) => Box::new(Lorenz96Model::new(spec.clone()).map_err(wrap)?),
            ModelConfig::Darcy(spec) => Box::new(DarcyModel::new(spec.clone()).map_err(wrap)?),
        })
    }

    /// Side lengths when the unknown is a 2-D field.
    pub fn field_shape(&self) -> Option<(usize, usize)> {
        match self {
            ModelConfig::GaussianBlur(s) => Some((s.image_height, s.image_width)),
            ModelConfig::Darcy(s) => Some((s.resolution, s.resolution)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitMean {
    Constant(f64),
    Vector(Vec<f64>),
    /// Truth smoothed by a Gaussian filter; `sigma` is a fraction of the side length.
    BlurredTruth { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variance {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub mean: InitMean,
    pub variance: Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub ensemble_size: usize,
    pub n_iterations: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub sec: SecConfig,
}

fn default_noisy() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Diagonal noise variance, one value for every component.
    pub variance: f64,
    /// Add a noise draw to `G(truth)` when synthesizing the data.
    #[serde(default = "default_noisy")]
    pub noisy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSource {
    Inline(Vec<f64>),
    /// `.pgm` image, or text with one number per line or comma.
    File(PathBuf),
    Generated { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    pub run: RunSettings,
    pub ensemble: EnsembleConfig,
    pub measurement: MeasurementConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<RegularizationConfig>,
    pub truth: TruthSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let key = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .unwrap_or("<document>")
                .to_string();
            Error::config(key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let expected: &[&str] = match self.experiment {
            ExperimentKind::Toy => &["identity"],
            ExperimentKind::CompressiveSensing => &["gaussian_matrix", "matrix"],
            ExperimentKind::Deblurring => &["gaussian_blur"],
            ExperimentKind::Lorenz96 => &["lorenz96"],
            ExperimentKind::Darcy => &["darcy"],
            ExperimentKind::Custom => &[],
        };
        if !expected.is_empty() && !expected.contains(&self.model.name()) {
            return Err(Error::config(
                "model.kind",
                format!("{:?} experiments need one of {expected:?}, got {}", self.experiment, self.model.name()),
            ));
        }
        let needs_reg = matches!(
            self.experiment,
            ExperimentKind::CompressiveSensing | ExperimentKind::Lorenz96 | ExperimentKind::Darcy
        );
        match (&self.reg, needs_reg) {
            (None, true) => {
                return Err(Error::config(
                    "reg",
                    "regularization is required for under-determined experiments",
                ))
            }
            (Some(r), _) => r.validate()?,
            _ => {}
        }
        if self.run.ensemble_size < 2 {
            return Err(Error::config("run.ensemble_size", "must be at least 2"));
        }
        if self.run.n_iterations < 1 {
            return Err(Error::config("run.n_iterations", "must be at least 1"));
        }
        self.run
            .sec
            .validate()
            .map_err(|e| Error::config("run.sec.exponent_a", e.to_string()))?;
        if !(self.measurement.variance > 0.0) {
            return Err(Error::config("measurement.variance", "must be positive"));
        }
        if let InitMean::BlurredTruth { sigma } = self.ensemble.mean {
            if self.model.field_shape().is_none() {
                return Err(Error::config("ensemble.mean", "blurred_truth needs a 2-D field model"));
            }
            if !(sigma > 0.0) {
                return Err(Error::config("ensemble.mean.blurred_truth.sigma", "must be positive"));
            }
        }
        Ok(())
    }

    /// Resolves the ensemble prior against the model dimension and truth.
    pub fn run_config(&self, n: usize, truth: &DVector<f64>) -> Result<RunConfig> {
        let init_mean = match &self.ensemble.mean {
            InitMean::Constant(c) => DVector::from_element(n, *c),
            InitMean::Vector(v) => DVector::from_column_slice(v),
            InitMean::BlurredTruth { sigma } => {
                let (h, w) = self.model.field_shape().expect("validated");
                DVector::from_vec(gaussian_filter(truth.as_slice(), h, w, sigma * w as f64))
            }
        };
        let init_variance = match &self.ensemble.variance {
            Variance::Scalar(v) => DVector::from_element(n, *v),
            Variance::Vector(v) => DVector::from_column_slice(v),
        };
        if init_mean.len() != n {
            return Err(Error::config(
                "ensemble.mean",
                format!("has {} entries but the model takes {n}", init_mean.len()),
            ));
        }
        let cfg = RunConfig {
            ensemble_size: self.run.ensemble_size,
            n_iterations: self.run.n_iterations,
            rng_seed: self.run.rng_seed,
            sec: self.run.sec,
            init_mean,
            init_variance,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "toy",
    "compressive_sensing",
    "deblurring",
    "lorenz96",
    "darcy",
    "darcy_full",
];

/// Built-in experiment settings.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let run = |k, iters, a: Option<f64>| RunSettings {
        ensemble_size: k,
        n_iterations: iters,
        rng_seed: 2021,
        sec: a.map_or(SecConfig::disabled(), SecConfig::power),
    };
    let cfg = match name {
        "toy" => ExperimentConfig {
            experiment: ExperimentKind::Toy,
            model: ModelConfig::Identity { dim: 100 },
            run: run(50, 20, Some(1.0)),
            ensemble: EnsembleConfig {
                mean: InitMean::Vector((0..100).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect()),
                variance: Variance::Scalar(0.1),
            },
            measurement: MeasurementConfig {
                variance: 0.1,
                noisy: false,
            },
            reg: None,
            truth: TruthSource::Generated { seed: 1 },
            output_dir: None,
        },
        "compressive_sensing" => ExperimentConfig {
            experiment: ExperimentKind::CompressiveSensing,
            model: ModelConfig::GaussianMatrix {
                rows: 30,
                cols: 100,
                seed: 7,
            },
            run: run(50, 20, Some(1.0)),
            ensemble: EnsembleConfig {
                mean: InitMean::Constant(0.0),
                variance: Variance::Scalar(1.0),
            },
            measurement: MeasurementConfig {
                variance: 1e-2,
                noisy: true,
            },
            reg: Some(RegularizationConfig { p: 1.0, lambda: 50.0 }),
            truth: TruthSource::Generated { seed: 7 },
            output_dir: None,
        },
        "deblurring" => ExperimentConfig {
            experiment: ExperimentKind::Deblurring,
            model: ModelConfig::GaussianBlur(BlurSpec {
                image_height: 32,
                image_width: 32,
                sigma_blur: 0.7,
            }),
            run: run(50, 25, Some(3.0)),
            ensemble: EnsembleConfig {
                mean: InitMean::Constant(0.0),
                variance: Variance::Scalar(2e-4),
            },
            measurement: MeasurementConfig {
                variance: 1e-4,
                noisy: true,
            },
            reg: None,
            truth: TruthSource::Generated { seed: 3 },
            output_dir: None,
        },
        "lorenz96" => ExperimentConfig {
            experiment: ExperimentKind::Lorenz96,
            model: ModelConfig::Lorenz96(Lorenz96Spec::default()),
            run: run(30, 20, Some(1.0)),
            ensemble: EnsembleConfig {
                mean: InitMean::Constant(0.0),
                variance: Variance::Scalar(1.0),
            },
            measurement: MeasurementConfig {
                variance: 1e-2,
                noisy: true,
            },
            reg: Some(RegularizationConfig { p: 2.0, lambda: 0.1 }),
            truth: TruthSource::Generated { seed: 4 },
            output_dir: None,
        },
        "darcy" | "darcy_full" => ExperimentConfig {
            experiment: ExperimentKind::Darcy,
            model: ModelConfig::Darcy(DarcySpec::new(if name == "darcy" { 25 } else { 50 }, 20)),
            run: run(300, 20, Some(0.2)),
            ensemble: EnsembleConfig {
                mean: InitMean::BlurredTruth { sigma: 0.1 },
                variance: Variance::Scalar(1e-3),
            },
            measurement: MeasurementConfig {
                variance: 1e-6,
                noisy: true,
            },
            reg: Some(RegularizationConfig { p: 1.0, lambda: DARCY_LAMBDA }),
            truth: TruthSource::Generated { seed: 5 },
            output_dir: None,
        },
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset {other}; known presets are {PRESET_NAMES:?}"),
            ))
        }
    };
    Ok(cfg)
}

pub(crate) const DARCY_LAMBDA: f64 = 1e4;

/// One-line description for `presets list`.
pub fn preset_summary(name: &str) -> &'static str {
    match name {
        "toy" => "identity model, N=100, K=50, a=1, observation variance 0.1",
        "compressive_sensing" => "30x100 Gaussian sensing matrix, l1 (p=1, lambda=50), K=50, a=1",
        "deblurring" => "32x32 synthetic image, Gaussian blur sigma=0.7, K=50, a=3",
        "lorenz96" => "Lorenz-96 initial state from 36 Fourier coefficients at t=0.5, p=2, lambda=0.1, K=30, a=1",
        "darcy" => "log-permeability from 20x20 pressure samples, 25x25 mesh, p=1, K=300, a=0.2",
        "darcy_full" => "as darcy on the 50x50 mesh",
        _ => "",
    }
}
