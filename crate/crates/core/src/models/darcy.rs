//! Steady Darcy flow `-div(k grad p) = f` on the unit square.
//!
//! Cell-centred finite volumes on an `n x n` grid: one pressure and one
//! log-permeability value per cell, harmonic averaging of `k` across
//! interior faces, Dirichlet data imposed at half a cell from the centre.
//! The resulting system is symmetric positive definite and banded with
//! half-bandwidth `n`, and is solved by a banded Cholesky factorization.
//!
//! Cells are ordered row-major with `x1` fastest: index `j * n + i` is the
//! cell centred at `((i + 1/2) h, (j + 1/2) h)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::eki::ForwardModel;
use crate::error::{ensure_dim, Error, Result};

/// Condition on one boundary face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceCondition {
    Dirichlet(f64),
    /// Prescribed inflow per unit length, `k dp/dn` with `n` the outward normal.
    Inflow(f64),
}

/// Discrete elliptic problem: per-cell source and per-face boundary data.
///
/// Boundary vectors run along the side in increasing coordinate order.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub n: usize,
    pub source: Vec<f64>,
    pub left: Vec<FaceCondition>,
    pub right: Vec<FaceCondition>,
    pub bottom: Vec<FaceCondition>,
    pub top: Vec<FaceCondition>,
}

impl EllipticProblem {
    /// Builds a problem by sampling `f` at cell centres and the side
    /// functions at face midpoints. Side functions take the coordinate along
    /// the side.
    pub fn sampled(
        n: usize,
        f: impl Fn(f64, f64) -> f64,
        left: impl Fn(f64) -> FaceCondition,
        right: impl Fn(f64) -> FaceCondition,
        bottom: impl Fn(f64) -> FaceCondition,
        top: impl Fn(f64) -> FaceCondition,
    ) -> Self {
        let h = 1.0 / n as f64;
        let centre = |i: usize| (i as f64 + 0.5) * h;
        let mut source = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                source.push(f(centre(i), centre(j)));
            }
        }
        EllipticProblem {
            n,
            source,
            left: (0..n).map(|j| left(centre(j))).collect(),
            right: (0..n).map(|j| right(centre(j))).collect(),
            bottom: (0..n).map(|i| bottom(centre(i))).collect(),
            top: (0..n).map(|i| top(centre(i))).collect(),
        }
    }

    fn has_dirichlet(&self) -> bool {
        [&self.left, &self.right, &self.bottom, &self.top]
            .iter()
            .any(|side| side.iter().any(|c| matches!(c, FaceCondition::Dirichlet(_))))
    }
}

/// Nodal (cell-centre) pressures on an `n x n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub n: usize,
    pub values: Vec<f64>,
}

impl PressureField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }
}

/// Symmetric band matrix, lower part, row `r` holding columns `r - bw ..= r`.
struct Band {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(dim: usize, bw: usize) -> Self {
        Band {
            dim,
            bw,
            data: vec![0.0; dim * (bw + 1)],
        }
    }

    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c <= r && r - c <= self.bw);
        r * (self.bw + 1) + (self.bw - (r - c))
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if c > r { (c, r) } else { (r, c) };
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if c > r { (c, r) } else { (r, c) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for r in 0..self.dim {
            let lo = r.saturating_sub(self.bw);
            for c in lo..=r {
                let a = self.data[self.idx(r, c)];
                y[r] += a * x[c];
                if c != r {
                    y[c] += a * x[r];
                }
            }
        }
        y
    }

    /// In-place Cholesky; fails with the index of a non-positive pivot.
    fn factor(mut self) -> Result<Band> {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        for r in 0..n {
            let lo = r.saturating_sub(bw);
            for c in lo..=r {
                let start = lo.max(c.saturating_sub(bw));
                let mut s = self.data[r * w + bw - (r - c)];
                for k in start..c {
                    s -= self.data[r * w + bw - (r - k)] * self.data[c * w + bw - (c - k)];
                }
                if c == r {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: r, value: s });
                    }
                    self.data[r * w + bw] = s.sqrt();
                } else {
                    self.data[r * w + bw - (r - c)] = s / self.data[c * w + bw];
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        for r in 0..n {
            let lo = r.saturating_sub(bw);
            let mut s = b[r];
            for c in lo..r {
                s -= self.data[r * w + bw - (r - c)] * b[c];
            }
            b[r] = s / self.data[r * w + bw];
        }
        for r in (0..n).rev() {
            b[r] /= self.data[r * w + bw];
            let lo = r.saturating_sub(bw);
            let xr = b[r];
            for c in lo..r {
                b[c] -= self.data[r * w + bw - (r - c)] * xr;
            }
        }
    }
}

/// Solves the problem for cell permeabilities `k > 0`.
pub fn solve_elliptic(k: &[f64], problem: &EllipticProblem) -> Result<PressureField> {
    let n = problem.n;
    ensure_dim("permeability cells", n * n, k.len())?;
    ensure_dim("source cells", n * n, problem.source.len())?;
    for side in [&problem.left, &problem.right, &problem.bottom, &problem.top] {
        ensure_dim("boundary faces", n, side.len())?;
    }
    if let Some(bad) = k.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Numerical(format!("permeability must be positive and finite, found {bad}")));
    }
    if !problem.has_dirichlet() {
        return Err(Error::Argument("pressure is only determined up to a constant without a Dirichlet face".into()));
    }

    let h = 1.0 / n as f64;
    let dim = n * n;
    let mut a = Band::new(dim, n);
    let mut b: Vec<f64> = problem.source.iter().map(|f| f * h * h).collect();
    let harmonic = |x: f64, y: f64| 2.0 * x * y / (x + y);

    let boundary = |cell: usize, cond: FaceCondition, a: &mut Band, b: &mut [f64]| match cond {
        FaceCondition::Dirichlet(g) => {
            let t = 2.0 * k[cell];
            a.add(cell, cell, t);
            b[cell] += t * g;
        }
        FaceCondition::Inflow(q) => b[cell] += q * h,
    };

    for j in 0..n {
        for i in 0..n {
            let p = j * n + i;
            if i + 1 < n {
                let t = harmonic(k[p], k[p + 1]);
                a.add(p, p, t);
                a.add(p + 1, p + 1, t);
                a.add(p + 1, p, -t);
            }
            if j + 1 < n {
                let t = harmonic(k[p], k[p + n]);
                a.add(p, p, t);
                a.add(p + n, p + n, t);
                a.add(p + n, p, -t);
            }
            if i == 0 {
                boundary(p, problem.left[j], &mut a, &mut b);
            }
            if i == n - 1 {
                boundary(p, problem.right[j], &mut a, &mut b);
            }
            if j == 0 {
                boundary(p, problem.bottom[i], &mut a, &mut b);
            }
            if j == n - 1 {
                boundary(p, problem.top[i], &mut a, &mut b);
            }
        }
    }

    let rhs = b.clone();
    let assembled_diag: Vec<f64> = (0..dim).map(|r| a.get(r, r)).collect();
    let original = Band {
        dim,
        bw: n,
        data: a.data.clone(),
    };
    let factor = a.factor().map_err(|e| Error::Numerical(format!("darcy system factorization failed: {e}")))?;
    factor.solve(&mut b);

    let residual = original.mul(&b);
    let rnorm = residual.iter().zip(&rhs).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = rhs.iter().map(|x| x * x).sum::<f64>().sqrt().max(
        assembled_diag
            .iter()
            .zip(&b)
            .map(|(d, x)| (d * x).powi(2))
            .sum::<f64>()
            .sqrt(),
    );
    if rnorm > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "darcy solve residual {rnorm:e} exceeds tolerance (scale {scale:e})"
        )));
    }
    Ok(PressureField { n, values: b })
}

fn default_source_levels() -> [f64; 3] {
    [0.0, 137.0, 274.0]
}
fn default_source_breaks() -> [f64; 2] {
    [4.0 / 6.0, 5.0 / 6.0]
}
fn default_bottom_pressure() -> f64 {
    100.0
}
fn default_left_inflow() -> f64 {
    500.0
}

/// Reservoir-style setup: banded source in `x2`, fixed pressure on the
/// bottom, inflow through the left side, no flow through top and right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarcySpec {
    /// Cells per side.
    pub resolution: usize,
    /// Observation lattice points per side.
    pub obs_grid: usize,
    #[serde(default = "default_source_levels")]
    pub source_levels: [f64; 3],
    #[serde(default = "default_source_breaks")]
    pub source_breaks: [f64; 2],
    #[serde(default = "default_bottom_pressure")]
    pub bottom_pressure: f64,
    #[serde(default = "default_left_inflow")]
    pub left_inflow: f64,
}

impl DarcySpec {
    pub fn new(resolution: usize, obs_grid: usize) -> Self {
        DarcySpec {
            resolution,
            obs_grid,
            source_levels: default_source_levels(),
            source_breaks: default_source_breaks(),
            bottom_pressure: default_bottom_pressure(),
            left_inflow: default_left_inflow(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 || self.obs_grid < 1 {
            return Err(Error::Argument(format!(
                "darcy grid too small: resolution {} obs_grid {}",
                self.resolution, self.obs_grid
            )));
        }
        Ok(())
    }

    pub fn source(&self, x2: f64) -> f64 {
        if x2 <= self.source_breaks[0] {
            self.source_levels[0]
        } else if x2 <= self.source_breaks[1] {
            self.source_levels[1]
        } else {
            self.source_levels[2]
        }
    }

    pub fn problem(&self) -> EllipticProblem {
        EllipticProblem::sampled(
            self.resolution,
            |_, x2| self.source(x2),
            |_| FaceCondition::Inflow(self.left_inflow),
            |_| FaceCondition::Inflow(0.0),
            |_| FaceCondition::Dirichlet(self.bottom_pressure),
            |_| FaceCondition::Inflow(0.0),
        )
    }
}

/// Pressure for the log-permeability field `log_k` (one value per cell).
pub fn darcy_solve(log_k: &DVector<f64>, spec: &DarcySpec) -> Result<PressureField> {
    spec.validate()?;
    if log_k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("log-permeability is not finite".into()));
    }
    let k: Vec<f64> = log_k.iter().map(|v| v.exp()).collect();
    solve_elliptic(&k, &spec.problem())
}

/// Observation lattice `((a + 1/2)/m, (b + 1/2)/m)`, `x1` fastest.
pub fn observation_points(obs_grid: usize) -> Vec<(f64, f64)> {
    let m = obs_grid as f64;
    let mut pts = Vec::with_capacity(obs_grid * obs_grid);
    for b in 0..obs_grid {
        for a in 0..obs_grid {
            pts.push(((a as f64 + 0.5) / m, (b as f64 + 0.5) / m));
        }
    }
    pts
}

/// Bilinear interpolation of cell-centre pressures.
///
/// Points closer to the wall than the first cell centre use the outermost
/// cell pair, which extends the interpolant linearly.
pub fn interpolate(p: &PressureField, x1: f64, x2: f64) -> f64 {
    let n = p.n;
    let h = 1.0 / n as f64;
    let locate = |x: f64| {
        let s = x / h - 0.5;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        (i, s - i as f64)
    };
    let (i, tx) = locate(x1);
    let (j, ty) = locate(x2);
    let p00 = p.at(i, j);
    let p10 = p.at(i + 1, j);
    let p01 = p.at(i, j + 1);
    let p11 = p.at(i + 1, j + 1);
    (1.0 - ty) * ((1.0 - tx) * p00 + tx * p10) + ty * ((1.0 - tx) * p01 + tx * p11)
}

pub fn darcy_observe(p: &PressureField, spec: &DarcySpec) -> DVector<f64> {
    let pts = observation_points(spec.obs_grid);
    DVector::from_iterator(pts.len(), pts.iter().map(|(x1, x2)| interpolate(p, *x1, *x2)))
}

/// Log-permeability to pressure observations.
#[derive(Debug, Clone)]
pub struct DarcyModel {
    spec: DarcySpec,
}

impl DarcyModel {
    pub fn new(spec: DarcySpec) -> Result<Self> {
        spec.validate()?;
        Ok(DarcyModel { spec })
    }

    pub fn spec(&self) -> &DarcySpec {
        &self.spec
    }
}

impl ForwardModel for DarcyModel {
    fn input_dim(&self) -> usize {
        self.spec.resolution * self.spec.resolution
    }
    fn output_dim(&self) -> usize {
        self.spec.obs_grid * self.spec.obs_grid
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("darcy log-permeability", self.input_dim(), u.len())?;
        let p = darcy_solve(u, &self.spec)?;
        Ok(darcy_observe(&p, &self.spec))
    }
}
