//! Exact Fourier-space solution of the periodic generalized advection-diffusion
//! equation
//!
//! ```text
//! d<c>/dt + u d<c>/dx = D <c>,    <c>(0, t) = <c>(L, t)
//! ```
//!
//! where `D` is diagonal in the Fourier basis with eigenvalues `mu_k`. Each
//! mode evolves independently as `c_k(t + dt) = c_k(t) exp((mu_k - i u a_k) dt)`
//! with wavenumber `a_k = 2 pi k / L`. Only non-negative wavenumbers are
//! stored; the field is real, so `c_{-k} = conj(c_k)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulus below which an initial-condition coefficient counts as unexcited.
pub const EXCITATION_THRESHOLD: f64 = 1e-13;

/// Periodic 1D grid `x_j = j L / n`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierGrid {
    length: f64,
    n_points: usize,
}

impl FourierGrid {
    pub fn new(length: f64, n_points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("domain length must be positive, got {length}")));
        }
        if n_points < 2 || n_points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "number of points must be even and at least 2, got {n_points}"
            )));
        }
        Ok(Self { length, n_points })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of stored modes, `n/2 + 1` (including the mean and the Nyquist mode).
    pub fn n_modes(&self) -> usize {
        self.n_points / 2 + 1
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn is_power_of_two(&self) -> bool {
        self.n_points.is_power_of_two()
    }

    /// `a_k = 2 pi k / L`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_modes()).map(|k| self.wavenumber(k)).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points).map(|j| j as f64 * h).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        (0.0..=self.length).contains(&x)
    }
}

/// Gaussian pulse `exp(-(x0 - x)^2 / (2 beta^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub center: f64,
    pub width: f64,
}

impl InitialCondition {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!("pulse width must be positive, got {width}")));
        }
        if !center.is_finite() {
            return Err(Error::NonFinite("pulse center".into()));
        }
        Ok(Self { center, width })
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = self.center - x;
        (-d * d / (2.0 * self.width * self.width)).exp()
    }

    fn validate_on(&self, grid: &FourierGrid) -> Result<()> {
        if !(self.center > 0.0 && self.center < grid.length()) {
            return Err(Error::InvalidParameter(format!(
                "pulse center {} outside (0, {})",
                self.center,
                grid.length()
            )));
        }
        Ok(())
    }
}

/// Fourier coefficients `c_k`, `k = 0..=n/2`, of a real periodic field at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    coeffs: Vec<Complex64>,
    time: f64,
    grid: FourierGrid,
}

impl ModalState {
    /// Discrete transform of grid samples, normalized so that `c_0` is the grid mean.
    pub fn from_samples(grid: FourierGrid, samples: &[f64]) -> Result<Self> {
        let n = grid.n_points();
        if samples.len() != n {
            return Err(Error::DimensionMismatch {
                context: "grid samples",
                expected: n,
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid samples".into()));
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let mut coeffs: Vec<Complex64> = buf[..grid.n_modes()].iter().map(|c| c * scale).collect();
        // Exactly real for real input; drop round-off.
        coeffs[0].im = 0.0;
        coeffs[n / 2].im = 0.0;
        Ok(Self {
            coeffs,
            time: 0.0,
            grid,
        })
    }

    pub fn from_coefficients(grid: FourierGrid, coeffs: Vec<Complex64>, time: f64) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::DimensionMismatch {
                context: "modal coefficients",
                expected: grid.n_modes(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, time, grid })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    /// Number of coefficients with modulus above `threshold`.
    pub fn excited_modes(&self, threshold: f64) -> usize {
        self.coeffs.iter().filter(|c| c.norm() > threshold).count()
    }

    /// Exact modal update `c_k <- c_k exp((mu_k - i u a_k) dt)`.
    pub fn propagate(&self, eigenvalues: &[Complex64], u_mean: f64, dt: f64) -> Result<Self> {
        if eigenvalues.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch {
                context: "eigenvalues",
                expected: self.coeffs.len(),
                got: eigenvalues.len(),
            });
        }
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be non-negative, got {dt}")));
        }
        if eigenvalues.iter().any(|m| !(m.re.is_finite() && m.im.is_finite())) {
            return Err(Error::NonFinite("eigenvalues".into()));
        }
        if !u_mean.is_finite() {
            return Err(Error::NonFinite("mean velocity".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(eigenvalues)
            .enumerate()
            .map(|(k, (c, mu))| {
                let rate = mu - Complex64::new(0.0, u_mean * self.grid.wavenumber(k));
                c * (rate * dt).exp()
            })
            .collect();
        Ok(Self {
            coeffs,
            time: self.time + dt,
            grid: self.grid,
        })
    }

    /// Real field `c_0 + 2 Re sum_{k>=1} c_k exp(i a_k x)` at arbitrary points.
    ///
    /// The Nyquist mode has no conjugate partner and enters with weight one.
    pub fn evaluate_field(&self, locations: &[f64]) -> Vec<f64> {
        let nyquist = self.coeffs.len() - 1;
        locations
            .iter()
            .map(|&x| {
                let mut acc = self.coeffs[0].re;
                for (k, c) in self.coeffs.iter().enumerate().skip(1) {
                    let phase = Complex64::from_polar(1.0, self.grid.wavenumber(k) * x);
                    let w = if k == nyquist { 1.0 } else { 2.0 };
                    acc += w * (c * phase).re;
                }
                acc
            })
            .collect()
    }

    /// Field values on the grid points via the inverse transform.
    pub fn to_samples(&self) -> Vec<f64> {
        let n = self.grid.n_points();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        for k in 1..n / 2 {
            buf[n - k] = self.coeffs[k].conj();
        }
        buf[n / 2] = Complex64::new(self.coeffs[n / 2].re, 0.0);
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

/// Grid transform of the sampled initial condition.
pub fn transform_initial_condition(ic: &InitialCondition, grid: &FourierGrid) -> Result<ModalState> {
    ic.validate_on(grid)?;
    let samples: Vec<f64> = grid.points().iter().map(|&x| ic.value(x)).collect();
    ModalState::from_samples(*grid, &samples)
}

/// Parameters of the fractional advection-diffusion operator `nu d^alpha/dx^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FradeParams {
    pub alpha: f64,
    pub nu: f64,
    pub u_mean: f64,
}

impl FradeParams {
    pub fn new(alpha: f64, nu: f64, u_mean: f64) -> Result<Self> {
        let p = Self { alpha, nu, u_mean };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "fractional order must lie in [1, 2], got {}",
                self.alpha
            )));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional coefficient must be positive, got {}",
                self.nu
            )));
        }
        if !self.u_mean.is_finite() {
            return Err(Error::NonFinite("mean velocity".into()));
        }
        Ok(())
    }

    /// `nu (i a)^alpha` on the principal branch, `i^alpha = exp(i alpha pi / 2)`.
    pub fn eigenvalue(&self, wavenumber: f64) -> Complex64 {
        if wavenumber == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(
            self.nu * wavenumber.powf(self.alpha),
            self.alpha * PI / 2.0,
        )
    }
}

/// FRADE eigenvalues `mu_k` for `k = 0..=n/2`, with `mu_0 = 0`.
pub fn frade_eigenvalues(params: &FradeParams, grid: &FourierGrid) -> Result<Vec<Complex64>> {
    params.validate()?;
    Ok((0..grid.n_modes())
        .map(|k| params.eigenvalue(grid.wavenumber(k)))
        .collect())
}
