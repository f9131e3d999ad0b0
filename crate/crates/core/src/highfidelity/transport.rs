//! Explicit solver for `dc/dt + div(u c) = nu lap c` on the periodic channel.
//!
//! Streamwise derivatives are pseudo-spectral (advective flux de-aliased by
//! the two-thirds rule); the transverse direction uses conservative central
//! finite volumes with zero-flux walls. Classical RK4 in time.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::darcy::VelocityField;
use super::Grid2d;
use crate::error::{Error, Result};

pub const CFL_SAFETY: f64 = 0.5;

pub struct Transport {
    grid: Grid2d,
    nu: f64,
    u: Vec<f64>,
    v_face: Vec<f64>,
    dt_limit: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `i a_k` for the advective flux, zero above the de-aliasing cutoff and at Nyquist.
    adv_symbol: Vec<Complex64>,
    /// `-nu a_k^2`.
    diff_symbol: Vec<f64>,
}

impl Transport {
    pub fn new(vel: &VelocityField, nu: f64) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("diffusivity must be non-negative, got {nu}")));
        }
        let grid = vel.grid;
        let nx = grid.nx;
        let (u, _) = vel.centered();
        let mut planner = FftPlanner::new();
        let cutoff = nx / 3;
        let two_pi_l = 2.0 * std::f64::consts::PI / grid.lx;
        let signed = |m: usize| if m <= nx / 2 { m as f64 } else { m as f64 - nx as f64 };
        let adv_symbol = (0..nx)
            .map(|m| {
                let k = signed(m);
                if m == nx / 2 || k.abs() > cutoff as f64 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, two_pi_l * k)
                }
            })
            .collect();
        let diff_symbol = (0..nx).map(|m| -nu * (two_pi_l * signed(m)).powi(2)).collect();

        let (umax, vmax) = vel.max_speed();
        let (dx, dy) = (grid.dx(), grid.dy());
        let adv_rate = std::f64::consts::PI * umax / dx + 2.0 * vmax / dy;
        let diff_rate = nu * ((std::f64::consts::PI / dx).powi(2) + 4.0 / (dy * dy));
        let dt_adv = if adv_rate > 0.0 { 1.0 / adv_rate } else { f64::INFINITY };
        let dt_diff = if diff_rate > 0.0 { 1.0 / diff_rate } else { f64::INFINITY };
        Ok(Self {
            grid,
            nu,
            u,
            v_face: vel.v_face.clone(),
            dt_limit: CFL_SAFETY * dt_adv.min(dt_diff),
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
            adv_symbol,
            diff_symbol,
        })
    }

    /// Largest admissible step (safety factor included).
    pub fn dt_limit(&self) -> f64 {
        self.dt_limit
    }

    fn rhs(&self, c: &[f64], out: &mut [f64], buf: &mut [Complex64]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let dy = self.grid.dy();
        let inv_n = 1.0 / nx as f64;
        for j in 0..ny {
            let row = &c[j * nx..(j + 1) * nx];
            let u = &self.u[j * nx..(j + 1) * nx];
            // Two real transforms in one: flux in the real part, c in the imaginary.
            for i in 0..nx {
                buf[i] = Complex64::new(u[i] * row[i], row[i]);
            }
            self.fwd.process(buf);
            let z: Vec<Complex64> = buf.to_vec();
            for m in 0..nx {
                let zc = z[(nx - m) % nx].conj();
                let flux_hat = 0.5 * (z[m] + zc);
                let c_hat = Complex64::new(0.0, -0.5) * (z[m] - zc);
                buf[m] = (-self.adv_symbol[m] * flux_hat + self.diff_symbol[m] * c_hat) * inv_n;
            }
            self.inv.process(buf);
            for i in 0..nx {
                out[j * nx + i] = buf[i].re;
            }
        }
        if ny < 2 {
            return;
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let a = j * nx + i;
                let b = a + nx;
                let flux = self.v_face[a] * 0.5 * (c[a] + c[b]) - self.nu * (c[b] - c[a]) / dy;
                out[a] -= flux / dy;
                out[b] += flux / dy;
            }
        }
    }

    /// Advances `c` by `t` in equal steps no longer than `dt` (or the stable limit).
    pub fn advance(&self, c: &mut [f64], t: f64, dt: Option<f64>) -> Result<usize> {
        if c.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                context: "concentration field",
                expected: self.grid.len(),
                got: c.len(),
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("advance time must be non-negative, got {t}")));
        }
        let max_dt = match dt {
            Some(d) if d > self.dt_limit => return Err(Error::CflViolation { dt: d, limit: self.dt_limit }),
            Some(d) if d > 0.0 => d,
            Some(d) => return Err(Error::InvalidParameter(format!("time step must be positive, got {d}"))),
            None => self.dt_limit,
        };
        if t == 0.0 {
            return Ok(0);
        }
        let steps = if max_dt.is_finite() { (t / max_dt).ceil().max(1.0) as usize } else { 1 };
        let h = t / steps as f64;
        let n = c.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.nx];
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for s in 0..steps {
            self.rhs(c, &mut k1, &mut buf);
            for i in 0..n {
                tmp[i] = c[i] + 0.5 * h * k1[i];
            }
            self.rhs(&tmp, &mut k2, &mut buf);
            for i in 0..n {
                tmp[i] = c[i] + 0.5 * h * k2[i];
            }
            self.rhs(&tmp, &mut k3, &mut buf);
            for i in 0..n {
                tmp[i] = c[i] + h * k3[i];
            }
            self.rhs(&tmp, &mut k4, &mut buf);
            for i in 0..n {
                c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if s % 64 == 0 && c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalBlowup(format!("non-finite concentration after {} steps", s + 1)));
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup("non-finite concentration".into()));
        }
        Ok(steps)
    }
}

/// Field with `profile(x)` replicated across `y`.
pub fn extrude(grid: &Grid2d, profile: impl Fn(f64) -> f64) -> Vec<f64> {
    let row: Vec<f64> = grid.xs().into_iter().map(profile).collect();
    row.repeat(grid.ny)
}

pub fn advance_ade_2d(c0: &[f64], vel: &VelocityField, nu: f64, t_end: f64, dt: Option<f64>) -> Result<Vec<f64>> {
    let mut c = c0.to_vec();
    Transport::new(vel, nu)?.advance(&mut c, t_end, dt)?;
    Ok(c)
}
