//! Evaluation of the spectral solution at scattered `(x, t)` observation points.
//!
//! The initial coefficients and the phases `exp(i a_k x_i)` are folded into a
//! per-point basis once, so one evaluation costs one complex exponential per
//! (distinct time, mode) pair plus a dense multiply-accumulate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{FourierGrid, ModalState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsPoint {
    pub x: f64,
    pub t: f64,
}

impl ObsPoint {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardModel {
    grid: FourierGrid,
    u_mean: f64,
    n_modes: usize,
    points: Vec<ObsPoint>,
    /// Distinct elapsed times since the initial state.
    times: Vec<f64>,
    time_of: Vec<usize>,
    /// Row-major `points x n_modes`: `w_k c_k(0) exp(i a_k x_i)`.
    basis: Vec<Complex64>,
}

impl ForwardModel {
    /// `n_modes` leading modes of `initial` (0..n_modes) enter the synthesis.
    pub fn new(initial: &ModalState, u_mean: f64, n_modes: usize, points: Vec<ObsPoint>) -> Result<Self> {
        let grid = *initial.grid();
        if n_modes == 0 || n_modes > grid.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "mode count {n_modes} outside 1..={}",
                grid.n_modes()
            )));
        }
        if !u_mean.is_finite() {
            return Err(Error::NonFinite("mean velocity".into()));
        }
        let mut times: Vec<f64> = Vec::new();
        let mut time_of = Vec::with_capacity(points.len());
        for p in &points {
            if !(p.x.is_finite() && grid.contains(p.x)) {
                return Err(Error::InvalidParameter(format!("observation x={} outside the domain", p.x)));
            }
            let dt = p.t - initial.time();
            if !(dt.is_finite() && dt >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "observation time {} precedes the initial state",
                    p.t
                )));
            }
            let idx = match times.iter().position(|&s| s == dt) {
                Some(i) => i,
                None => {
                    times.push(dt);
                    times.len() - 1
                }
            };
            time_of.push(idx);
        }
        let nyquist = grid.n_modes() - 1;
        let c0 = initial.coefficients();
        let mut basis = Vec::with_capacity(points.len() * n_modes);
        for p in &points {
            for (k, c) in c0.iter().enumerate().take(n_modes) {
                let w = if k == 0 || k == nyquist { 1.0 } else { 2.0 };
                basis.push(c * Complex64::from_polar(w, grid.wavenumber(k) * p.x));
            }
        }
        Ok(Self {
            grid,
            u_mean,
            n_modes,
            points,
            times,
            time_of,
            basis,
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn u_mean(&self) -> f64 {
        self.u_mean
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn points(&self) -> &[ObsPoint] {
        &self.points
    }

    pub fn n_outputs(&self) -> usize {
        self.points.len()
    }

    fn check_spectrum(&self, mu: &[Complex64]) -> Result<()> {
        if mu.len() < self.n_modes {
            return Err(Error::DimensionMismatch {
                context: "spectrum",
                expected: self.n_modes,
                got: mu.len(),
            });
        }
        if mu[..self.n_modes].iter().any(|m| !(m.re.is_finite() && m.im.is_finite())) {
            return Err(Error::NonFinite("eigenvalues".into()));
        }
        Ok(())
    }

    fn growth_factors(&self, mu: &[Complex64], modes: impl Iterator<Item = usize> + Clone) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.times.len() * self.n_modes);
        for &t in &self.times {
            for k in modes.clone() {
                let rate = mu[k] - Complex64::new(0.0, self.u_mean * self.grid.wavenumber(k));
                out.push((rate * t).exp());
            }
        }
        out
    }

    /// Model values at the observation points for the spectrum `mu` (indexed from k = 0).
    pub fn evaluate(&self, mu: &[Complex64]) -> Result<Vec<f64>> {
        self.check_spectrum(mu)?;
        let mut out = vec![0.0; self.points.len()];
        self.evaluate_unchecked(mu, &mut out);
        Ok(out)
    }

    pub(crate) fn evaluate_unchecked(&self, mu: &[Complex64], out: &mut [f64]) {
        let m = self.n_modes;
        let factors = self.growth_factors(mu, 0..m);
        for (i, o) in out.iter_mut().enumerate() {
            let f = &factors[self.time_of[i] * m..(self.time_of[i] + 1) * m];
            let b = &self.basis[i * m..(i + 1) * m];
            *o = b.iter().zip(f).map(|(b, f)| b.re * f.re - b.im * f.im).sum();
        }
    }

    /// Split evaluator: modes `1..=head` vary, everything else is frozen at `mu`.
    pub fn with_frozen_tail(&self, mu: &[Complex64], head: usize) -> Result<HeadForward> {
        self.check_spectrum(mu)?;
        if head + 1 > self.n_modes {
            return Err(Error::InvalidParameter(format!(
                "inferred head {head} exceeds the {} available modes",
                self.n_modes - 1
            )));
        }
        let m = self.n_modes;
        let tail_modes = std::iter::once(0).chain(head + 1..m);
        let factors = self.growth_factors(mu, tail_modes.clone());
        let nt = m - head;
        let mut base = Vec::with_capacity(self.points.len());
        let mut head_basis = Vec::with_capacity(self.points.len() * head);
        for i in 0..self.points.len() {
            let f = &factors[self.time_of[i] * nt..(self.time_of[i] + 1) * nt];
            let b = &self.basis[i * m..(i + 1) * m];
            let v: f64 = tail_modes
                .clone()
                .zip(f)
                .map(|(k, f)| b[k].re * f.re - b[k].im * f.im)
                .sum();
            base.push(v);
            head_basis.extend_from_slice(&b[1..=head]);
        }
        Ok(HeadForward {
            head,
            u_mean: self.u_mean,
            wavenumbers: (1..=head).map(|k| self.grid.wavenumber(k)).collect(),
            times: self.times.clone(),
            time_of: self.time_of.clone(),
            base,
            head_basis,
        })
    }
}

/// Forward evaluator over the inferred head `mu_1..mu_K` with a cached tail contribution.
#[derive(Debug, Clone)]
pub struct HeadForward {
    head: usize,
    u_mean: f64,
    wavenumbers: Vec<f64>,
    times: Vec<f64>,
    time_of: Vec<usize>,
    base: Vec<f64>,
    head_basis: Vec<Complex64>,
}

impl HeadForward {
    pub fn head(&self) -> usize {
        self.head
    }

    pub fn n_outputs(&self) -> usize {
        self.base.len()
    }

    /// `mu_head[j]` is the eigenvalue of mode `j + 1`.
    pub fn evaluate_into(&self, mu_head: &[Complex64], out: &mut [f64]) {
        debug_assert_eq!(mu_head.len(), self.head);
        let h = self.head;
        let mut factors = Vec::with_capacity(self.times.len() * h);
        for &t in &self.times {
            for (mu, a) in mu_head.iter().zip(&self.wavenumbers) {
                factors.push(((mu - Complex64::new(0.0, self.u_mean * a)) * t).exp());
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let f = &factors[self.time_of[i] * h..(self.time_of[i] + 1) * h];
            let b = &self.head_basis[i * h..(i + 1) * h];
            *o = self.base[i] + b.iter().zip(f).map(|(b, f)| b.re * f.re - b.im * f.im).sum::<f64>();
        }
    }

    pub fn evaluate(&self, mu_head: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len()];
        self.evaluate_into(mu_head, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{frade_eigenvalues, transform_initial_condition, FradeParams, InitialCondition};

    fn setup() -> (ModalState, Vec<Complex64>) {
        let g = FourierGrid::new(4.0, 128).unwrap();
        let s = transform_initial_condition(&InitialCondition::new(1.0, 0.1).unwrap(), &g).unwrap();
        let mu = frade_eigenvalues(&FradeParams::new(1.5, 0.05, 1.0).unwrap(), &g).unwrap();
        (s, mu)
    }

    #[test]
    fn matches_modal_propagation() {
        let (s, mu) = setup();
        let pts: Vec<_> = [(0.3, 0.5), (1.7, 0.5), (2.0, 1.25), (3.9, 0.0)]
            .iter()
            .map(|&(x, t)| ObsPoint::new(x, t))
            .collect();
        let fm = ForwardModel::new(&s, 1.0, s.grid().n_modes(), pts.clone()).unwrap();
        let got = fm.evaluate(&mu).unwrap();
        for (p, g) in pts.iter().zip(got) {
            let e = s.propagate(&mu, 1.0, p.t).unwrap().evaluate_field(&[p.x])[0];
            assert!((g - e).abs() < 1e-13, "{g} vs {e}");
        }
    }

    #[test]
    fn frozen_tail_split_is_consistent() {
        let (s, mu) = setup();
        let pts: Vec<_> = (0..20).map(|i| ObsPoint::new(0.2 * i as f64, 0.1 * (i % 4) as f64)).collect();
        let fm = ForwardModel::new(&s, 1.0, 40, pts).unwrap();
        let full = fm.evaluate(&mu).unwrap();
        let hf = fm.with_frozen_tail(&mu, 7).unwrap();
        let split = hf.evaluate(&mu[1..=7]);
        for (a, b) in full.iter().zip(&split) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_points_outside_domain_or_before_start() {
        let (s, _) = setup();
        assert!(ForwardModel::new(&s, 1.0, 10, vec![ObsPoint::new(4.5, 0.0)]).is_err());
        assert!(ForwardModel::new(&s, 1.0, 10, vec![ObsPoint::new(1.0, -0.1)]).is_err());
        assert!(ForwardModel::new(&s, 1.0, 0, vec![]).is_err());
    }
}
