//! Gaussian data models: independent noise with a common standard deviation,
//! or a dense covariance factored once up front.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::observations::NoiseModel;

/// Minimum variance imposed on the likelihood covariance diagonal.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub enum GaussianLikelihood {
    Iid {
        sigma: f64,
        log_norm: f64,
    },
    Covariance {
        chol: Cholesky<f64, Dyn>,
        log_norm: f64,
    },
}

impl GaussianLikelihood {
    pub fn new(noise: &NoiseModel, n_obs: usize) -> Result<Self> {
        noise.validate(n_obs)?;
        match noise {
            NoiseModel::IidGaussian { sigma } => Ok(Self::iid(*sigma, n_obs)),
            NoiseModel::Covariance { matrix, .. } => Self::covariance(matrix, n_obs),
        }
    }

    pub fn iid(sigma: f64, n_obs: usize) -> Self {
        Self::Iid {
            sigma,
            log_norm: -0.5 * n_obs as f64 * (2.0 * PI * sigma * sigma).ln(),
        }
    }

    pub fn covariance(matrix: &[f64], n: usize) -> Result<Self> {
        let m = DMatrix::from_row_slice(n, n, matrix);
        let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite)?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok(Self::Covariance {
            chol,
            log_norm: -0.5 * (n as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    /// Constant `-1/2 ln |2 pi S|`.
    pub fn log_normalization(&self) -> f64 {
        match self {
            Self::Iid { log_norm, .. } | Self::Covariance { log_norm, .. } => *log_norm,
        }
    }

    /// `-1/2 r^T S^-1 r` for residual `r = d - model`.
    pub fn quadratic_term(&self, residual: &[f64]) -> f64 {
        match self {
            Self::Iid { sigma, .. } => {
                -residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * sigma * sigma)
            }
            Self::Covariance { chol, .. } => {
                let mut z = DVector::from_column_slice(residual);
                chol.l_dirty().solve_lower_triangular_mut(&mut z);
                -0.5 * z.norm_squared()
            }
        }
    }

    pub fn log_likelihood(&self, data: &[f64], model: &[f64]) -> f64 {
        let r: Vec<f64> = data.iter().zip(model).map(|(d, m)| d - m).collect();
        self.log_normalization() + self.quadratic_term(&r)
    }
}

pub fn log_likelihood_iid(data: &[f64], model: &[f64], sigma: f64) -> f64 {
    GaussianLikelihood::iid(sigma, data.len()).log_likelihood(data, model)
}

pub fn log_likelihood_cov(data: &[f64], model: &[f64], covariance: &[f64]) -> Result<f64> {
    Ok(GaussianLikelihood::covariance(covariance, data.len())?.log_likelihood(data, model))
}

/// Raises each diagonal entry of a row-major square matrix to at least `floor`.
pub fn apply_variance_floor(matrix: &mut [f64], n: usize, floor: f64) {
    for i in 0..n {
        let d = &mut matrix[i * n + i];
        *d = d.max(floor);
    }
}

/// Covariance of an ensemble mean from the member sample covariance, floored.
pub fn mean_covariance(sample_cov: &[f64], n: usize, n_members: usize, floor: f64) -> Vec<f64> {
    let scale = 1.0 / n_members as f64;
    let mut s: Vec<f64> = sample_cov.iter().map(|v| v * scale).collect();
    apply_variance_floor(&mut s, n, floor);
    s
}
