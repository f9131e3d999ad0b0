//! Zero-mean Gaussian fields with separable squared-exponential covariance,
//! periodic in `x` and bounded in `y`.
//!
//! The covariance factors as `C = C_x (x) C_y`. `C_x` is circulant (periodic
//! lag distance) and is square-rooted in Fourier space; `C_y` is dense and
//! square-rooted through its eigendecomposition. Tiny negative eigenvalues
//! from truncation are clipped.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::Grid2d;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfConfig {
    pub variance: f64,
    pub ell_x: f64,
    pub ell_y: f64,
}

impl Default for GrfConfig {
    fn default() -> Self {
        Self {
            variance: 1.0,
            ell_x: 0.2,
            ell_y: 0.2,
        }
    }
}

impl GrfConfig {
    pub fn validate(&self, grid: &Grid2d) -> Result<()> {
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!("field variance must be non-negative, got {}", self.variance)));
        }
        if !(self.ell_x > 0.0 && self.ell_y > 0.0) {
            return Err(Error::InvalidParameter("correlation lengths must be positive".into()));
        }
        if self.ell_x > 0.1 * grid.lx {
            return Err(Error::InvalidParameter(format!(
                "x correlation length {} exceeds a tenth of the domain",
                self.ell_x
            )));
        }
        Ok(())
    }

    pub fn covariance(&self, dx: f64, dy: f64) -> f64 {
        self.variance * (-0.5 * (dx / self.ell_x).powi(2) - 0.5 * (dy / self.ell_y).powi(2)).exp()
    }
}

pub struct GrfSampler {
    grid: Grid2d,
    /// `sqrt` of the circulant eigenvalues, scaled by `1/nx` for the inverse transform.
    x_root: Vec<f64>,
    /// `V diag(sqrt(lambda))`, row-major `ny x ny`.
    y_root: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl GrfSampler {
    pub fn new(grid: Grid2d, config: &GrfConfig) -> Result<Self> {
        config.validate(&grid)?;
        let nx = grid.nx;
        let ny = grid.ny;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nx);
        let inv = planner.plan_fft_inverse(nx);

        let mut row: Vec<Complex64> = (0..nx)
            .map(|i| {
                let d = grid.x(i).min(grid.lx - grid.x(i));
                Complex64::new((-0.5 * (d / config.ell_x).powi(2)).exp(), 0.0)
            })
            .collect();
        fwd.process(&mut row);
        let x_root = row.iter().map(|l| l.re.max(0.0).sqrt() / nx as f64).collect();

        let cy = DMatrix::from_fn(ny, ny, |a, b| {
            config.variance * (-0.5 * ((grid.y(a) - grid.y(b)) / config.ell_y).powi(2)).exp()
        });
        let eig = SymmetricEigen::new(cy);
        let mut y_root = vec![0.0; ny * ny];
        for a in 0..ny {
            for m in 0..ny {
                y_root[a * ny + m] = eig.eigenvectors[(a, m)] * eig.eigenvalues[m].max(0.0).sqrt();
            }
        }
        Ok(Self {
            grid,
            x_root,
            y_root,
            fwd,
            inv,
        })
    }

    pub fn grid(&self) -> &Grid2d {
        &self.grid
    }

    /// One field, deterministic in `seed`.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..nx * ny).map(|_| StandardNormal.sample(&mut rng)).collect();
        // Correlate across y: w[j][i] = sum_m Y[j][m] z[m][i].
        let mut w = vec![0.0; nx * ny];
        for j in 0..ny {
            for m in 0..ny {
                let c = self.y_root[j * ny + m];
                if c == 0.0 {
                    continue;
                }
                for (o, v) in w[j * nx..(j + 1) * nx].iter_mut().zip(&z[m * nx..(m + 1) * nx]) {
                    *o += c * v;
                }
            }
        }
        // Correlate along x, row by row.
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        for row in w.chunks_mut(nx) {
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex64::new(*v, 0.0);
            }
            self.fwd.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.x_root) {
                *b *= s;
            }
            self.inv.process(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re;
            }
        }
        w
    }
}

/// Convenience wrapper: one log-permeability field.
pub fn sample_log_permeability(grid: Grid2d, config: &GrfConfig, seed: u64) -> Result<Vec<f64>> {
    Ok(GrfSampler::new(grid, config)?.sample(seed))
}
