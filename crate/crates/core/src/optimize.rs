//! Derivative-free local optimization: Nelder–Mead with dimension-adapted
//! coefficients, plus the two fitting stages that seed the sampler.

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::likelihood::GaussianLikelihood;
use crate::observations::ObservationSet;
use crate::posterior::Posterior;
use crate::spectral::{frade_eigenvalues, FradeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the simplex spread in value falls below this.
    pub f_tol: f64,
    /// ... and its extent in every coordinate below this.
    pub x_tol: f64,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            f_tol: 1e-10,
            x_tol: 1e-9,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

/// Minimizes `f` from `x0` with initial simplex edge lengths `step`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: &[f64], opts: &NelderMeadOptions) -> OptimResult {
    let n = x0.len();
    let nf = n.max(1) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut trace = vec![best_f];
    let mut converged = false;

    for round in 0..=opts.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += step[i];
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        converged = false;
        while evals < opts.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            let extent = (0..n)
                .map(|j| {
                    simplex
                        .iter()
                        .map(|p| (p.0[j] - simplex[0].0[j]).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if (hi - lo).abs() <= opts.f_tol * (1.0 + lo.abs()) && extent <= opts.x_tol {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for p in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(&p.0) {
                    *c += v / nf;
                }
            }
            let towards = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = towards(alpha, &simplex[n].0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = towards(gamma, &simplex[n].0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = towards(alpha * rho, &simplex[n].0);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = towards(-rho, &simplex[n].0);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < fr.min(simplex[n].1) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = x_best.iter().zip(&p.0).map(|(b, v)| b + sigma * (v - b)).collect();
                        let v = eval(&x, &mut evals);
                        *p = (x, v);
                    }
                }
            }
            let cur = simplex.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            trace.push(cur.min(*trace.last().unwrap()));
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best_f;
        if simplex[0].1 <= best_f {
            best_x = simplex[0].0.clone();
            best_f = simplex[0].1;
        }
        debug!("simplex round {round}: value {best_f:e} after {evals} evaluations");
        if !improved && round > 0 {
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
    }
    OptimResult {
        x: best_x,
        value: best_f,
        evaluations: evals,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FradeFit {
    pub alpha: f64,
    pub nu: f64,
    pub log_likelihood: f64,
    pub converged: bool,
}

impl FradeFit {
    pub fn params(&self, u_mean: f64) -> Result<FradeParams> {
        FradeParams::new(self.alpha, self.nu, u_mean)
    }
}

const ALPHA_RANGE: (f64, f64) = (1.0, 2.0);

/// Maximum-likelihood order and coefficient of a fractional operator.
///
/// A coarse `(alpha, ln nu)` grid picks the start; the order is clamped to
/// `[1, 2]` with a quadratic penalty on the excess so the simplex stays near
/// the admissible region.
pub fn optimize_frade_mle(forward: &ForwardModel, obs: &ObservationSet, opts: &NelderMeadOptions) -> Result<FradeFit> {
    if obs.is_empty() {
        return Err(Error::InvalidParameter("no observations to fit".into()));
    }
    let likelihood = GaussianLikelihood::new(&obs.noise, obs.len())?;
    let grid = *forward.grid();
    let u_mean = forward.u_mean();
    let mut out = vec![0.0; obs.len()];
    let mut neg_ll = |x: &[f64]| -> f64 {
        let alpha = x[0].clamp(ALPHA_RANGE.0, ALPHA_RANGE.1);
        let excess = x[0] - alpha;
        let Ok(p) = FradeParams::new(alpha, x[1].exp(), u_mean) else {
            return f64::INFINITY;
        };
        let Ok(mu) = frade_eigenvalues(&p, &grid) else {
            return f64::INFINITY;
        };
        forward.evaluate_unchecked(&mu, &mut out);
        -likelihood.log_likelihood(&obs.values, &out) + 1e6 * excess * excess
    };

    let mut start = [1.5, 0.05f64.ln()];
    let mut best = f64::INFINITY;
    for i in 0..=10 {
        let alpha = 1.0 + 0.1 * i as f64;
        for j in 0..=40 {
            let ln_nu = (1e-4f64).ln() + (1e4f64).ln() * j as f64 / 40.0;
            let v = neg_ll(&[alpha, ln_nu]);
            if v < best {
                best = v;
                start = [alpha, ln_nu];
            }
        }
    }
    let r = nelder_mead(&mut neg_ll, &start, &[0.05, 0.1], opts);
    if !r.converged {
        warn!("fractional fit did not converge; returning best point");
    }
    let alpha = r.x[0].clamp(ALPHA_RANGE.0, ALPHA_RANGE.1);
    let nu = r.x[1].exp();
    let p = FradeParams::new(alpha, nu, u_mean)?;
    forward.evaluate_unchecked(&frade_eigenvalues(&p, &grid)?, &mut out);
    Ok(FradeFit {
        alpha,
        nu,
        log_likelihood: likelihood.log_likelihood(&obs.values, &out),
        converged: r.converged,
    })
}

/// Local maximizer of the log-posterior from `start`.
pub fn optimize_map(posterior: &Posterior, start: &[f64], opts: &NelderMeadOptions) -> Result<OptimResult> {
    if posterior.log_posterior(start) == f64::NEG_INFINITY {
        return Err(Error::StartNotEvaluable);
    }
    let step = vec![0.1; start.len()];
    let mut r = nelder_mead(|x| -posterior.log_posterior(x), start, &step, opts);
    if !r.converged {
        warn!("posterior maximization did not converge; returning best point");
    }
    r.value = -r.value;
    r.trace.iter_mut().for_each(|v| *v = -*v);
    Ok(r)
}

/// FRADE spectrum truncated to the forward model's modes.
pub fn frade_reference(fit: &FradeFit, forward: &ForwardModel) -> Result<Vec<Complex64>> {
    let mut mu = frade_eigenvalues(&fit.params(forward.u_mean())?, forward.grid())?;
    mu.truncate(forward.n_modes());
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], &NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn minimizes_quadratic_in_ten_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 0.5).powi(2)).sum::<f64>();
        let r = nelder_mead(f, &[0.0; 10], &[0.2; 10], &NelderMeadOptions::default());
        assert!(r.x.iter().all(|v| (v - 0.5).abs() < 1e-4), "{:?}", r.x);
    }

    #[test]
    fn stays_at_a_minimum() {
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let r = nelder_mead(f, &[0.0, 0.0], &[0.1, 0.1], &NelderMeadOptions::default());
        assert_eq!(r.x, vec![0.0, 0.0]);
    }

    #[test]
    fn nan_counts_as_worst() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let r = nelder_mead(f, &[0.5], &[0.3], &NelderMeadOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }
}
