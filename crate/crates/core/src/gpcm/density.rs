use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// A Gaussian with a cached Cholesky factor, for repeated log-density
/// evaluation.
#[derive(Debug, Clone)]
pub struct GaussianTerm {
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianTerm {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: cov.nrows(),
            });
        }
        let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let chol_l = chol.unpack();
        let log_det: f64 = 2.0 * chol_l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let log_norm = -0.5 * (p as f64 * (2.0 * PI).ln() + log_det);
        Ok(Self {
            mean: mean.clone(),
            chol_l,
            log_norm,
        })
    }

    pub fn log_density(&self, x: DVectorView<'_, f64>) -> f64 {
        let p = self.mean.len();
        // forward substitution for L y = x - mu; the Mahalanobis term is |y|^2
        let mut y = vec![0.0; p];
        let mut maha = 0.0;
        for i in 0..p {
            let mut s = x[i] - self.mean[i];
            for (k, yk) in y.iter().enumerate().take(i) {
                s -= self.chol_l[(i, k)] * yk;
            }
            let yi = s / self.chol_l[(i, i)];
            y[i] = yi;
            maha += yi * yi;
        }
        self.log_norm - 0.5 * maha
    }
}

/// `log φ(x | μ, Σ)`.
pub fn log_component_density(
    x: &DVector<f64>,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: x.len(),
        });
    }
    Ok(GaussianTerm::new(mu, sigma)?.log_density(x.as_view()))
}

/// `φ(x | μ, Σ)`, the multivariate Gaussian density.
pub fn component_density(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    log_component_density(x, mu, sigma).map(f64::exp)
}

/// Numerically stable `log Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
