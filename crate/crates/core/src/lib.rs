//! Derivative-free inverse-problem solving with ensemble Kalman inversion.
//!
//! - [`eki`]: the perturbed-observation ensemble update and iteration loop.
//! - [`sec`]: power-law shrinkage of sample correlations (`r -> |r|^a r`),
//!   which lets small ensembles ignore spurious correlations.
//! - [`lp`]: lp-regularized inversion via a change of variables and an
//!   augmented measurement system.
//! - [`models`]: benchmark forward models (identity, Gaussian sensing
//!   matrix, image blur, Lorenz-96 with Fourier measurements, Darcy flow).
//! - [`harness`]: configurable experiments, metrics files and diagnostics.
//!
//! ```
//! use ekisec::eki::{run, MeasurementModel, RunConfig};
//! use ekisec::models::identity_model;
//! use ekisec::sec::SecConfig;
//! use nalgebra::DVector;
//!
//! let model = identity_model(3);
//! let data = MeasurementModel::isotropic(DVector::from_element(3, 1.0), 0.1).unwrap();
//! let cfg = RunConfig {
//!     ensemble_size: 20,
//!     n_iterations: 5,
//!     rng_seed: 1,
//!     sec: SecConfig::power(1.0),
//!     init_mean: DVector::zeros(3),
//!     init_variance: DVector::from_element(3, 0.5),
//! };
//! let record = run(&model, &data, &cfg, None).unwrap();
//! assert_eq!(record.iterations.len(), 5);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eki;
pub mod error;
pub mod harness;
pub mod lp;
pub mod models;
pub mod rng;
pub mod sec;
pub mod stats;

pub use error::{Error, Result};
