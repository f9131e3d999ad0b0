//! Variance-based global screening with Sobol total-effect indices.
//!
//! Saltelli design: two independent base matrices `A`, `B` and, for every
//! parameter `i`, the hybrid `A_B^i` (A with column `i` taken from B). The
//! Jansen estimator gives per output
//!
//! ```text
//! S_T,i = mean((f(A) - f(A_B^i))^2) / (2 Var f)
//! ```

use log::warn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::operator::{head_eigenvalues, theta_names};
use crate::prior::PriorSpec;

pub const DEFAULT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_BASE_SAMPLES: usize = 1024;
pub const MIN_BASE_SAMPLES: usize = 64;

/// Rows handled per task. Fixed so the reduction order never depends on the thread pool.
const BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub n_params: usize,
    pub n_outputs: usize,
    /// Row-major `n_params x n_outputs`.
    pub total_effect: Vec<f64>,
    pub output_variance: Vec<f64>,
    /// Outputs with zero variance, left out of the aggregation.
    pub flat_outputs: Vec<usize>,
    /// Maximum over informative outputs, per parameter.
    pub aggregated: Vec<f64>,
}

impl SensitivityResult {
    pub fn index(&self, param: usize, output: usize) -> f64 {
        self.total_effect[param * self.n_outputs + output]
    }

    /// Parameter indices whose aggregated index exceeds `threshold`.
    pub fn sensitive_parameters(&self, threshold: f64) -> Vec<usize> {
        (0..self.n_params).filter(|&i| self.aggregated[i] > threshold).collect()
    }

    /// Per-mode index `max(S(r_k), S(u_k))` for theta-ordered parameters.
    pub fn mode_index(&self) -> Vec<f64> {
        let k = self.n_params / 2;
        (0..k).map(|j| self.aggregated[j].max(self.aggregated[k + j])).collect()
    }
}

/// Total-effect indices of `model` with each parameter uniform on `bounds`.
///
/// `model(x, out)` writes `n_outputs` values.
pub fn sobol_total_effect<F>(
    model: F,
    n_outputs: usize,
    bounds: &[(f64, f64)],
    n_base: usize,
    seed: u64,
) -> Result<SensitivityResult>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if n_base < MIN_BASE_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "base sample size {n_base} below {MIN_BASE_SAMPLES}"
        )));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::InvalidParameter(format!("invalid screening range [{lo}, {hi}]")));
    }
    let d = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> {
        let mut m = Vec::with_capacity(n_base * d);
        for _ in 0..n_base {
            for &(lo, hi) in bounds {
                m.push(lo + (hi - lo) * rng.gen::<f64>());
            }
        }
        m
    };
    let a = draw();
    let b = draw();

    let eval_rows = |m: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n_base * n_outputs];
        out.par_chunks_mut(n_outputs * BLOCK)
            .zip(m.par_chunks(d * BLOCK))
            .for_each(|(o, x)| {
                for (o, x) in o.chunks_mut(n_outputs).zip(x.chunks(d)) {
                    model(x, o);
                }
            });
        out
    };
    let fa = eval_rows(&a);
    let fb = eval_rows(&b);

    let variance = pooled_variance(&fa, &fb, n_outputs);
    let flat_outputs: Vec<usize> = (0..n_outputs).filter(|&j| variance[j] <= 0.0).collect();

    let mut total_effect = vec![0.0; d * n_outputs];
    for i in 0..d {
        let partials: Vec<Vec<f64>> = (0..n_base)
            .collect::<Vec<_>>()
            .par_chunks(BLOCK)
            .map(|rows| {
                let mut x = vec![0.0; d];
                let mut f = vec![0.0; n_outputs];
                let mut acc = vec![0.0; n_outputs];
                for &r in rows {
                    x.copy_from_slice(&a[r * d..(r + 1) * d]);
                    x[i] = b[r * d + i];
                    model(&x, &mut f);
                    for ((s, fa), f) in acc.iter_mut().zip(&fa[r * n_outputs..(r + 1) * n_outputs]).zip(&f) {
                        let diff = fa - f;
                        *s += diff * diff;
                    }
                }
                acc
            })
            .collect();
        let row = &mut total_effect[i * n_outputs..(i + 1) * n_outputs];
        for p in &partials {
            for (s, v) in row.iter_mut().zip(p) {
                *s += v;
            }
        }
        for (j, s) in row.iter_mut().enumerate() {
            *s = if variance[j] > 0.0 {
                *s / n_base as f64 / (2.0 * variance[j])
            } else {
                0.0
            };
        }
    }

    let aggregated = (0..d)
        .map(|i| {
            (0..n_outputs)
                .filter(|&j| variance[j] > 0.0)
                .map(|j| total_effect[i * n_outputs + j])
                .fold(0.0, f64::max)
        })
        .collect();

    Ok(SensitivityResult {
        n_params: d,
        n_outputs,
        total_effect,
        output_variance: variance,
        flat_outputs,
        aggregated,
    })
}

fn pooled_variance(fa: &[f64], fb: &[f64], n_outputs: usize) -> Vec<f64> {
    let rows = (fa.len() + fb.len()) / n_outputs;
    let mut mean = vec![0.0; n_outputs];
    for row in fa.chunks(n_outputs).chain(fb.chunks(n_outputs)) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; n_outputs];
    for row in fa.chunks(n_outputs).chain(fb.chunks(n_outputs)) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    // Outputs that cannot move beyond round-off count as flat.
    for (s, m) in var.iter_mut().zip(&mean) {
        *s /= rows as f64;
        if *s <= (1e-12 * m).powi(2) {
            *s = 0.0;
        }
    }
    var
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Contiguous head `1..=head` to infer.
    pub head: usize,
    /// Modes whose real or imaginary parameter passed the threshold.
    pub sensitive_modes: Vec<usize>,
    pub threshold: f64,
    /// Set when nothing passed and the head fell back to one mode.
    pub fallback: bool,
}

/// Head through the largest sensitive mode of a theta-ordered screening.
pub fn select_inferred_set(result: &SensitivityResult, threshold: f64) -> Selection {
    let sensitive_modes: Vec<usize> = result
        .mode_index()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(j, _)| j + 1)
        .collect();
    match sensitive_modes.last() {
        Some(&head) => Selection {
            head,
            sensitive_modes,
            threshold,
            fallback: false,
        },
        None => {
            warn!("no eigenvalue exceeded the sensitivity threshold {threshold:e}; inferring one mode");
            Selection {
                head: 1,
                sensitive_modes,
                threshold,
                fallback: true,
            }
        }
    }
}

/// Screens every non-mean mode of `forward`, each `(r_k, u_k)` drawn over the
/// central 95% of its prior.
pub fn screen_eigenvalues(forward: &ForwardModel, nu_max: Option<f64>, decay_factor: f64, n_base: usize, seed: u64) -> Result<SensitivityResult> {
    let head = forward.n_modes() - 1;
    let grid = *forward.grid();
    let u_mean = forward.u_mean();
    let prior = match nu_max {
        Some(v) => PriorSpec::with_nu_max(&grid, u_mean, decay_factor, v, head)?,
        None => PriorSpec::new(&grid, u_mean, decay_factor, head)?,
    };
    let bounds = prior.central_interval(0.95);
    let zero = vec![Complex64::new(0.0, 0.0); forward.n_modes()];
    let hf = forward.with_frozen_tail(&zero, head)?;
    sobol_total_effect(
        |theta, out| hf.evaluate_into(&head_eigenvalues(theta, u_mean, &grid), out),
        forward.n_outputs(),
        &bounds,
        n_base,
        seed,
    )
}

/// Rows of `k,param,S_T_max,sensitive` for a theta-ordered screening.
pub fn write_screening_csv<W: std::io::Write>(w: W, result: &SensitivityResult, threshold: f64) -> Result<()> {
    let k = result.n_params / 2;
    let names = theta_names(k);
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "param", "S_T_max", "sensitive"])?;
    for (i, name) in names.iter().enumerate() {
        let s = result.aggregated[i];
        wr.write_record([
            (i % k + 1).to_string(),
            name.clone(),
            format!("{:e}", s.max(0.0)),
            (s > threshold).to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
