//! Sample statistics and dense kernels shared by the solvers.
//!
//! Covariances use the `1/K` normalization throughout, not the unbiased
//! `1/(K-1)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{ensure_dim, Error, Result};

/// `K >= 2` vectors of a common dimension, stored as the columns of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: DMatrix<f64>,
}

impl SampleSet {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() < 2 {
            return Err(Error::Argument(format!(
                "a sample set needs at least 2 members, got {}",
                data.ncols()
            )));
        }
        Ok(SampleSet { data })
    }

    pub fn from_members(members: &[DVector<f64>]) -> Result<Self> {
        let dim = members.first().map_or(0, |m| m.len());
        for m in members {
            ensure_dim("sample set member", dim, m.len())?;
        }
        Self::from_matrix(DMatrix::from_columns(members))
    }

    /// Number of members `K`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    /// Member dimension `D`.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn member(&self, k: usize) -> DVector<f64> {
        self.data.column(k).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Members minus the sample mean, column by column.
    pub fn deviations(&self) -> DMatrix<f64> {
        let mean = sample_mean(self);
        let mut dev = self.data.clone();
        for mut col in dev.column_iter_mut() {
            col -= &mean;
        }
        dev
    }
}

pub fn sample_mean(s: &SampleSet) -> DVector<f64> {
    let mut mean = DVector::zeros(s.dim());
    for col in s.data.column_iter() {
        mean += col;
    }
    mean / s.len() as f64
}

/// `(1/K) sum_k (u_k - u_mean)(g_k - g_mean)^T`.
pub fn cross_covariance(u: &SampleSet, g: &SampleSet) -> Result<DMatrix<f64>> {
    ensure_dim("cross covariance member count", u.len(), g.len())?;
    let du = u.deviations();
    let dg = g.deviations();
    Ok(&du * dg.transpose() / u.len() as f64)
}

pub fn auto_covariance(g: &SampleSet) -> DMatrix<f64> {
    let dg = g.deviations();
    let mut c = &dg * dg.transpose() / g.len() as f64;
    symmetrize(&mut c);
    c
}

/// Per-component standard deviations under the `1/K` convention.
pub fn standard_deviations(s: &SampleSet) -> DVector<f64> {
    let dev = s.deviations();
    let k = s.len() as f64;
    DVector::from_iterator(
        s.dim(),
        dev.row_iter().map(|row| (row.norm_squared() / k).sqrt()),
    )
}

pub(crate) fn symmetrize(c: &mut DMatrix<f64>) {
    let n = c.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
}

/// `C = diag(sd_left) * R * diag(sd_right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceDecomposition {
    pub sd_left: DVector<f64>,
    pub sd_right: DVector<f64>,
    pub r: DMatrix<f64>,
}

impl CovarianceDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        reassemble(&self.r, &self.sd_left, &self.sd_right)
    }
}

pub(crate) fn reassemble(r: &DMatrix<f64>, sd_left: &DVector<f64>, sd_right: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| sd_left[i] * r[(i, j)] * sd_right[j])
}

/// Splits a covariance into standard deviations and a correlation matrix.
///
/// Entries whose row or column standard deviation is zero get correlation 0,
/// and computed correlations are clamped to `[-1, 1]`.
pub fn corr_decompose(
    c: &DMatrix<f64>,
    sd_left: &DVector<f64>,
    sd_right: &DVector<f64>,
) -> Result<CovarianceDecomposition> {
    ensure_dim("correlation rows", c.nrows(), sd_left.len())?;
    ensure_dim("correlation columns", c.ncols(), sd_right.len())?;
    if let Some(bad) = sd_left.iter().chain(sd_right.iter()).find(|s| !(**s >= 0.0)) {
        return Err(Error::Argument(format!(
            "standard deviations must be nonnegative, found {bad}"
        )));
    }
    let r = DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| {
        let denom = sd_left[i] * sd_right[j];
        if denom == 0.0 {
            0.0
        } else {
            (c[(i, j)] / denom).clamp(-1.0, 1.0)
        }
    });
    Ok(CovarianceDecomposition {
        sd_left: sd_left.clone(),
        sd_right: sd_right.clone(),
        r,
    })
}

/// Lower Cholesky factor of an SPD matrix, stored row-major.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    l: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl SpdFactor {
    /// Factors `a`, reading only its lower triangle.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        ensure_dim("spd factor (square)", a.nrows(), a.ncols())?;
        let n = a.nrows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let (done, rest) = l.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &done[j * n..j * n + j + 1];
                let s = a[(i, j)] - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let s = a[(i, i)] - dot(&row_i[..i], &row_i[..i]);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: s });
            }
            row_i[i] = s.sqrt();
        }
        Ok(SpdFactor { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// `L z`, used to colour standard normal draws.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), &z[..=i])).collect()
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = self.row(i);
            x[i] = (x[i] - dot(&row[..i], &x[..i])) / row[i];
        }
        for i in (0..n).rev() {
            let row = self.row(i);
            x[i] /= row[i];
            let xi = x[i];
            for (xj, lij) in x[..i].iter_mut().zip(&row[..i]) {
                *xj -= lij * xi;
            }
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dim("spd solve rows", self.n, b.nrows())?;
        let mut x = b.clone();
        if self.n > 0 {
            x.as_mut_slice()
                .par_chunks_mut(self.n)
                .for_each(|col| self.solve_in_place(col));
        }
        Ok(x)
    }
}

/// Solves `a X = b` through a Cholesky factorization of `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SpdFactor::new(a)?.solve(b)
}
