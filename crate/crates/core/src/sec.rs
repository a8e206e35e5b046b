//! Power-law sampling error correction.
//!
//! Every sample correlation `r` is shrunk to `s(r) r` with `s(r) = |r|^a`.
//! Perfect correlations are left alone and weak, likely spurious ones are
//! pushed toward zero. The corrected covariances are reassembled from the
//! original standard deviations, so `C_sec[i][j] = |r_ij|^a * C[i][j]`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::stats::symmetrize;

const CORRELATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecConfig {
    pub enabled: bool,
    pub exponent_a: f64,
}

impl Default for SecConfig {
    fn default() -> Self {
        SecConfig::disabled()
    }
}

impl SecConfig {
    pub fn disabled() -> Self {
        SecConfig {
            enabled: false,
            exponent_a: 0.0,
        }
    }

    pub fn power(exponent_a: f64) -> Self {
        SecConfig {
            enabled: true,
            exponent_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent_a >= 0.0) || !self.exponent_a.is_finite() {
            return Err(Error::Argument(format!(
                "correction exponent must be finite and >= 0, got {}",
                self.exponent_a
            )));
        }
        Ok(())
    }

    /// True when the correction changes anything at all.
    pub fn is_active(&self) -> bool {
        self.enabled && self.exponent_a != 0.0
    }
}

fn check_exponent(a: f64) -> Result<()> {
    SecConfig::power(a).validate()
}

fn check_correlation(r: f64) -> Result<f64> {
    if !(r.abs() <= 1.0 + CORRELATION_SLACK) {
        return Err(Error::Argument(format!("correlation {r} outside [-1, 1]")));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// `s(r) = |r|^a`.
pub fn correction_factor(r: f64, a: f64) -> Result<f64> {
    check_exponent(a)?;
    Ok(check_correlation(r)?.abs().powf(a))
}

/// Element-wise `r -> |r|^a r`.
pub fn correct_correlation_matrix(r: &DMatrix<f64>, a: f64) -> Result<DMatrix<f64>> {
    check_exponent(a)?;
    let mut out = r.clone();
    out.as_mut_slice()
        .par_iter_mut()
        .try_for_each(|x| -> Result<()> {
            let r = check_correlation(*x)?;
            *x = r.abs().powf(a) * r;
            Ok(())
        })?;
    Ok(out)
}

/// Scales each covariance entry by the correction factor of its correlation.
fn shrink(c: &DMatrix<f64>, sd_left: &DVector<f64>, sd_right: &DVector<f64>, a: f64) -> DMatrix<f64> {
    let rows = c.nrows();
    let mut out = c.clone();
    out.as_mut_slice()
        .par_chunks_mut(rows.max(1))
        .enumerate()
        .for_each(|(j, col)| {
            for (i, x) in col.iter_mut().enumerate() {
                let denom = sd_left[i] * sd_right[j];
                if denom == 0.0 {
                    *x = 0.0;
                } else {
                    let r = (*x / denom).abs().min(1.0);
                    *x *= r.powf(a);
                }
            }
        });
    out
}

/// Returns `(C^{ug}_sec, C^{gg}_sec)`.
///
/// `sd_g` must be the square root of the diagonal of `c_gg`. With the
/// correction inactive the inputs come back unchanged.
pub fn corrected_covariances(
    c_ug: &DMatrix<f64>,
    c_gg: &DMatrix<f64>,
    sd_u: &DVector<f64>,
    sd_g: &DVector<f64>,
    cfg: &SecConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    cfg.validate()?;
    ensure_dim("corrected covariance rows", sd_u.len(), c_ug.nrows())?;
    ensure_dim("corrected covariance columns", sd_g.len(), c_ug.ncols())?;
    ensure_dim("prediction covariance (square)", c_gg.nrows(), c_gg.ncols())?;
    ensure_dim("prediction covariance", sd_g.len(), c_gg.nrows())?;
    for (i, s) in sd_g.iter().enumerate() {
        let d = c_gg[(i, i)];
        let sq = s * s;
        if !(*s >= 0.0) || (sq - d).abs() > 1e-10 * d.abs().max(sq) {
            return Err(Error::Argument(format!(
                "standard deviation {s} inconsistent with variance {d} at component {i}"
            )));
        }
    }
    if !cfg.is_active() {
        return Ok((c_ug.clone(), c_gg.clone()));
    }
    let a = cfg.exponent_a;
    let c_ug_sec = shrink(c_ug, sd_u, sd_g, a);
    let mut c_gg_sec = shrink(c_gg, sd_g, sd_g, a);
    symmetrize(&mut c_gg_sec);
    for i in 0..c_gg.nrows() {
        c_gg_sec[(i, i)] = c_gg[(i, i)];
    }
    Ok((c_ug_sec, c_gg_sec))
}
