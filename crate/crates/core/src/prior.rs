//! Independent exponential priors on the decay rates `-Re mu_k` and the lags
//! `u a_k - Im mu_k`, expressed as densities over their logarithms.
//!
//! Each scale is chosen so 95% of the mass lies below a physical bound: the
//! decay rate of a diffusion that damps the shortest-lived mode by a factor
//! `A` within one flowthrough, and twice the advective frequency for the lag.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SpectrumParams;
use crate::spectral::FourierGrid;

/// Default damping factor over one flowthrough.
pub const DEFAULT_DECAY_FACTOR: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub nu_max: f64,
    pub decay_factor: f64,
    pub u_mean: f64,
    pub beta_real: Vec<f64>,
    pub beta_imag: Vec<f64>,
}

/// `L u ln(A) / (4 pi^2)`.
pub fn max_diffusivity(length: f64, u_mean: f64, decay_factor: f64) -> f64 {
    length * u_mean * decay_factor.ln() / (4.0 * PI * PI)
}

impl PriorSpec {
    /// Prior for modes `1..=head` with `nu_max` from the damping factor.
    pub fn new(grid: &FourierGrid, u_mean: f64, decay_factor: f64, head: usize) -> Result<Self> {
        if !(decay_factor.is_finite() && decay_factor > 1.0) {
            return Err(Error::InvalidParameter(format!("decay factor must exceed 1, got {decay_factor}")));
        }
        let nu_max = max_diffusivity(grid.length(), u_mean, decay_factor);
        Self::with_nu_max(grid, u_mean, decay_factor, nu_max, head)
    }

    pub fn with_nu_max(grid: &FourierGrid, u_mean: f64, decay_factor: f64, nu_max: f64, head: usize) -> Result<Self> {
        if !(nu_max.is_finite() && nu_max > 0.0) {
            return Err(Error::InvalidParameter(format!("nu_max must be positive, got {nu_max}")));
        }
        if !(u_mean.is_finite() && u_mean > 0.0) {
            return Err(Error::InvalidParameter(format!("mean velocity must be positive, got {u_mean}")));
        }
        let ln20 = 20f64.ln();
        let a: Vec<f64> = (1..=head).map(|k| grid.wavenumber(k)).collect();
        Ok(Self {
            nu_max,
            decay_factor,
            u_mean,
            beta_real: a.iter().map(|a| nu_max * a * a / ln20).collect(),
            beta_imag: a.iter().map(|a| 2.0 * u_mean * a / ln20).collect(),
        })
    }

    pub fn head(&self) -> usize {
        self.beta_real.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.head()
    }

    /// Exponential scale of parameter `i` in theta order.
    pub fn scale(&self, i: usize) -> f64 {
        let k = self.head();
        if i < k {
            self.beta_real[i]
        } else {
            self.beta_imag[i - k]
        }
    }

    /// Log-density of the `i`-th parameter's marginal.
    pub fn log_marginal(&self, i: usize, value: f64) -> f64 {
        log_exp_density(value, self.scale(i))
    }

    pub fn log_prior_theta(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        theta.iter().enumerate().map(|(i, &v)| self.log_marginal(i, v)).sum()
    }

    pub fn log_prior(&self, params: &SpectrumParams) -> Result<f64> {
        if params.head() != self.head() {
            return Err(Error::DimensionMismatch {
                context: "prior head",
                expected: self.head(),
                got: params.head(),
            });
        }
        Ok(self.log_prior_theta(&params.theta()))
    }

    /// Draws theta; deterministic in `seed`.
    pub fn sample_theta(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..self.dim())
            .map(|i| {
                let e: f64 = Exp1.sample(&mut rng);
                (self.scale(i) * e).ln()
            })
            .collect()
    }

    pub fn sample_prior(&self, template: &SpectrumParams, seed: u64) -> Result<SpectrumParams> {
        template.with_theta(&self.sample_theta(seed))
    }

    /// Log-space interval holding the central `mass` of each marginal.
    pub fn central_interval(&self, mass: f64) -> Vec<(f64, f64)> {
        let tail = 0.5 * (1.0 - mass);
        (0..self.dim())
            .map(|i| {
                let b = self.scale(i);
                (exp_quantile(tail, b).ln(), exp_quantile(1.0 - tail, b).ln())
            })
            .collect()
    }
}

/// Density of `ln X` for `X ~ Exponential(scale)`.
pub fn log_exp_density(log_value: f64, scale: f64) -> f64 {
    -log_value.exp() / scale + log_value - scale.ln()
}

fn exp_quantile(p: f64, scale: f64) -> f64 {
    -scale * (-p).ln_1p()
}
