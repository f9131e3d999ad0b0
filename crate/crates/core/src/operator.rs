//! Eigenvalue parametrization of the uncertain transport operator.
//!
//! The inferred vector is `theta = [r_1..r_K, u_1..u_K]` with
//!
//! ```text
//! Re mu_k = -exp(r_k)
//! Im mu_k = u a_k - exp(u_k)
//! ```
//!
//! so every finite `theta` yields a decaying, downstream-propagating spectrum.
//! Modes above `K` are pinned to a fixed tail and `mu_0 = 0` conserves mass.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::FourierGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumParams {
    log_decay: Vec<f64>,
    log_lag: Vec<f64>,
    /// `mu_k` for `k = K+1..n_modes`.
    fixed_tail: Vec<Complex64>,
    u_mean: f64,
    grid: FourierGrid,
}

impl SpectrumParams {
    pub fn new(
        log_decay: Vec<f64>,
        log_lag: Vec<f64>,
        fixed_tail: Vec<Complex64>,
        u_mean: f64,
        grid: FourierGrid,
    ) -> Result<Self> {
        if log_decay.len() != log_lag.len() {
            return Err(Error::DimensionMismatch {
                context: "log_lag",
                expected: log_decay.len(),
                got: log_lag.len(),
            });
        }
        if log_decay.len() + fixed_tail.len() + 1 > grid.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "{} inferred + {} fixed eigenvalues exceed the {} grid modes",
                log_decay.len(),
                fixed_tail.len(),
                grid.n_modes()
            )));
        }
        if log_decay.iter().chain(&log_lag).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum parameters".into()));
        }
        if let Some(m) = fixed_tail.iter().find(|m| !(m.re <= 0.0 && m.im.is_finite())) {
            return Err(Error::InvalidParameter(format!("fixed tail eigenvalue {m} is not decaying")));
        }
        Ok(Self {
            log_decay,
            log_lag,
            fixed_tail,
            u_mean,
            grid,
        })
    }

    /// Head `1..=head` mapped back from `spectrum`, tail `head+1..n_modes` pinned to it.
    pub fn from_spectrum(spectrum: &[Complex64], head: usize, n_modes: usize, u_mean: f64, grid: FourierGrid) -> Result<Self> {
        if n_modes > spectrum.len() || head + 1 > n_modes {
            return Err(Error::InvalidParameter(format!(
                "cannot take head {head} of {n_modes} modes from a spectrum of length {}",
                spectrum.len()
            )));
        }
        let mut r = Vec::with_capacity(head);
        let mut u = Vec::with_capacity(head);
        for (k, mu) in spectrum.iter().enumerate().take(head + 1).skip(1) {
            let (rk, uk) = invert_eigenvalue(*mu, u_mean * grid.wavenumber(k))?;
            r.push(rk);
            u.push(uk);
        }
        Self::new(r, u, spectrum[head + 1..n_modes].to_vec(), u_mean, grid)
    }

    /// Number of inferred eigenvalue pairs `K`.
    pub fn head(&self) -> usize {
        self.log_decay.len()
    }

    /// Spectrum length `N_k`, including `mu_0`.
    pub fn n_modes(&self) -> usize {
        1 + self.head() + self.fixed_tail.len()
    }

    pub fn log_decay(&self) -> &[f64] {
        &self.log_decay
    }

    pub fn log_lag(&self) -> &[f64] {
        &self.log_lag
    }

    pub fn fixed_tail(&self) -> &[Complex64] {
        &self.fixed_tail
    }

    pub fn u_mean(&self) -> f64 {
        self.u_mean
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    /// `[r_1..r_K, u_1..u_K]`.
    pub fn theta(&self) -> Vec<f64> {
        self.log_decay.iter().chain(&self.log_lag).copied().collect()
    }

    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        let k = self.head();
        if theta.len() != 2 * k {
            return Err(Error::DimensionMismatch {
                context: "theta",
                expected: 2 * k,
                got: theta.len(),
            });
        }
        Self::new(
            theta[..k].to_vec(),
            theta[k..].to_vec(),
            self.fixed_tail.clone(),
            self.u_mean,
            self.grid,
        )
    }

    /// Parameter names in theta order.
    pub fn names(&self) -> Vec<String> {
        theta_names(self.head())
    }
}

pub fn theta_names(head: usize) -> Vec<String> {
    (1..=head)
        .map(|k| format!("r_{k}"))
        .chain((1..=head).map(|k| format!("u_{k}")))
        .collect()
}

/// `(r, u) -> mu` for a mode with advective frequency `u a_k`.
pub fn map_eigenvalue(log_decay: f64, log_lag: f64, advective: f64) -> Complex64 {
    Complex64::new(-log_decay.exp(), advective - log_lag.exp())
}

/// Inverse of [`map_eigenvalue`]; defined on the open constraint region.
pub fn invert_eigenvalue(mu: Complex64, advective: f64) -> Result<(f64, f64)> {
    let lag = advective - mu.im;
    if !(mu.re < 0.0 && lag > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue {mu} outside the constraint region (Re < 0, Im < {advective})"
        )));
    }
    Ok(((-mu.re).ln(), lag.ln()))
}

/// Eigenvalues of the full right-hand-side operator, `mu_k`, `k = 0..N_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpectrum {
    mu: Vec<Complex64>,
    grid: FourierGrid,
}

impl OperatorSpectrum {
    pub fn new(mu: Vec<Complex64>, grid: FourierGrid) -> Self {
        Self { mu, grid }
    }

    pub fn mu(&self) -> &[Complex64] {
        &self.mu
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Closure-operator eigenvalues `lambda_k = mu_k + nu_p a_k^2`.
    pub fn lambda(&self, nu_p: f64) -> Vec<Complex64> {
        lambda_from_mu(self, nu_p)
    }

    /// Inverse of [`lambda_from_mu`].
    pub fn from_lambda(lambda: &[Complex64], nu_p: f64, grid: FourierGrid) -> Self {
        let mu = lambda
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let a = grid.wavenumber(k);
                l - nu_p * a * a
            })
            .collect();
        Self { mu, grid }
    }
}

pub fn assemble_spectrum(params: &SpectrumParams) -> OperatorSpectrum {
    let mut mu = Vec::with_capacity(params.n_modes());
    mu.push(Complex64::new(0.0, 0.0));
    for (k, (r, u)) in params.log_decay.iter().zip(&params.log_lag).enumerate() {
        let a = params.grid.wavenumber(k + 1);
        mu.push(map_eigenvalue(*r, *u, params.u_mean * a));
    }
    mu.extend_from_slice(&params.fixed_tail);
    OperatorSpectrum { mu, grid: params.grid }
}

/// Head eigenvalues `mu_1..mu_K` straight from theta, without the tail.
pub fn head_eigenvalues(theta: &[f64], u_mean: f64, grid: &FourierGrid) -> Vec<Complex64> {
    let k = theta.len() / 2;
    (0..k)
        .map(|j| map_eigenvalue(theta[j], theta[k + j], u_mean * grid.wavenumber(j + 1)))
        .collect()
}

pub fn lambda_from_mu(spectrum: &OperatorSpectrum, nu_p: f64) -> Vec<Complex64> {
    spectrum
        .mu
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let a = spectrum.grid.wavenumber(k);
            m + nu_p * a * a
        })
        .collect()
}

/// Per-mode outcome of the physical admissibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// `mu_0 = 0`.
    pub mass_conserving: bool,
    /// `Re mu_k <= 0`, indexed by k.
    pub decaying: Vec<bool>,
    /// `Im mu_k < u a_k` for `k >= 1`; entry 0 is always true.
    pub downstream: Vec<bool>,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.mass_conserving && self.decaying.iter().all(|&b| b) && self.downstream.iter().all(|&b| b)
    }

    pub fn first_violation(&self) -> Option<usize> {
        (0..self.decaying.len()).find(|&k| !(self.decaying[k] && self.downstream[k]))
    }
}

pub fn check_constraints(spectrum: &OperatorSpectrum, u_mean: f64) -> ConstraintReport {
    let mu = &spectrum.mu;
    ConstraintReport {
        mass_conserving: mu.first().map_or(true, |m| m.re == 0.0 && m.im == 0.0),
        decaying: mu.iter().map(|m| m.re <= 0.0).collect(),
        downstream: mu
            .iter()
            .enumerate()
            .map(|(k, m)| k == 0 || m.im < u_mean * spectrum.grid.wavenumber(k))
            .collect(),
    }
}

/// Serialized form: index-tagged `[Re, Im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub domain_length: f64,
    pub n_points: usize,
    pub u_mean: f64,
    pub eigenvalues: Vec<EigenvalueEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEntry {
    pub k: usize,
    pub mu: [f64; 2],
}

impl SpectrumRecord {
    pub fn from_spectrum(spectrum: &OperatorSpectrum, u_mean: f64) -> Self {
        Self {
            domain_length: spectrum.grid.length(),
            n_points: spectrum.grid.n_points(),
            u_mean,
            eigenvalues: spectrum
                .mu
                .iter()
                .enumerate()
                .map(|(k, m)| EigenvalueEntry { k, mu: [m.re, m.im] })
                .collect(),
        }
    }

    pub fn to_spectrum(&self) -> Result<OperatorSpectrum> {
        let grid = FourierGrid::new(self.domain_length, self.n_points)?;
        let mut mu = vec![Complex64::new(0.0, 0.0); self.eigenvalues.len()];
        for e in &self.eigenvalues {
            let slot = mu.get_mut(e.k).ok_or_else(|| Error::Parse(format!("eigenvalue index {} out of range", e.k)))?;
            *slot = Complex64::new(e.mu[0], e.mu[1]);
        }
        Ok(OperatorSpectrum { mu, grid })
    }
}
