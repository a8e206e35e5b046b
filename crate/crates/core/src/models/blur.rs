use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::eki::ForwardModel;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlurSpec {
    pub image_height: usize,
    pub image_width: usize,
    /// Kernel standard deviation in pixels.
    pub sigma_blur: f64,
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`, `radius = ceil(4 sigma)`.
fn kernel_1d(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= total);
    k
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let j = i.rem_euclid(period);
    (if j < n { j } else { period - 1 - j }) as usize
}

fn convolve_axis(src: &[f64], dst: &mut [f64], h: usize, w: usize, taps: &[f64], along_rows: bool) {
    let radius = (taps.len() / 2) as i64;
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, weight) in taps.iter().enumerate() {
                let d = t as i64 - radius;
                let idx = if along_rows {
                    r * w + reflect(c as i64 + d, w)
                } else {
                    reflect(r as i64 + d, h) * w + c
                };
                acc += weight * src[idx];
            }
            dst[r * w + c] = acc;
        }
    }
}

/// Separable Gaussian filter of a row-major `h x w` field with reflect padding.
pub fn gaussian_filter(data: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let taps = kernel_1d(sigma);
    let mut tmp = vec![0.0; data.len()];
    let mut out = vec![0.0; data.len()];
    convolve_axis(data, &mut tmp, h, w, &taps, true);
    convolve_axis(&tmp, &mut out, h, w, &taps, false);
    out
}

#[derive(Debug, Clone)]
pub struct GaussianBlurModel {
    spec: BlurSpec,
}

impl GaussianBlurModel {
    pub fn new(spec: BlurSpec) -> Result<Self> {
        if !(spec.sigma_blur > 0.0) || spec.image_height == 0 || spec.image_width == 0 {
            return Err(Error::Argument(format!("invalid blur spec {spec:?}")));
        }
        Ok(GaussianBlurModel { spec })
    }

    pub fn spec(&self) -> &BlurSpec {
        &self.spec
    }
}

impl ForwardModel for GaussianBlurModel {
    fn input_dim(&self) -> usize {
        self.spec.image_height * self.spec.image_width
    }
    fn output_dim(&self) -> usize {
        self.input_dim()
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("blur model input", self.input_dim(), u.len())?;
        let out = gaussian_filter(u.as_slice(), self.spec.image_height, self.spec.image_width, self.spec.sigma_blur);
        Ok(DVector::from_vec(out))
    }
}
