//! Posterior post-processing: information gain per parameter, summaries,
//! correlations and predictive envelopes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dram::Chain;
use crate::error::{Error, Result};
use crate::operator::map_eigenvalue;
use crate::prior::PriorSpec;
use crate::spectral::FourierGrid;

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Monte Carlo `mean(ln N(x; m, s) - ln p(x))` over `samples` with the
/// Gaussian fitted to the samples.
pub fn kl_gaussian_approx<F: Fn(f64) -> f64>(samples: &[f64], log_reference: F) -> Result<(f64, f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::DegenerateChain("fewer than two samples".into()));
    }
    let (m, s) = mean_std(samples);
    if !(s > 0.0) {
        return Err(Error::DegenerateChain("marginal has zero variance".into()));
    }
    let c = -0.5 * (2.0 * PI * s * s).ln();
    let kl = samples
        .iter()
        .map(|&x| c - 0.5 * ((x - m) / s).powi(2) - log_reference(x))
        .sum::<f64>()
        / samples.len() as f64;
    Ok((kl, m, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEntry {
    pub name: String,
    pub kl: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub n_samples: usize,
    pub entries: Vec<KlEntry>,
}

impl KlReport {
    /// `(KL of r_k, KL of u_k)` for mode `k`.
    pub fn mode(&self, k: usize) -> (f64, f64) {
        let h = self.entries.len() / 2;
        (self.entries[k - 1].kl, self.entries[h + k - 1].kl)
    }
}

/// Information gain of every post-burn-in marginal against its prior.
pub fn kl_divergence(chain: &Chain, prior: &PriorSpec) -> Result<KlReport> {
    if prior.dim() != chain.dim {
        return Err(Error::DimensionMismatch {
            context: "prior dimension",
            expected: chain.dim,
            got: prior.dim(),
        });
    }
    let entries = (0..chain.dim)
        .into_par_iter()
        .map(|j| {
            let col = chain.column(j);
            let (kl, mean, std) = kl_gaussian_approx(&col, |x| prior.log_marginal(j, x))
                .map_err(|e| Error::DegenerateChain(format!("{}: {e}", chain.names[j])))?;
            Ok(KlEntry {
                name: chain.names[j].clone(),
                kl,
                mean,
                std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KlReport {
        n_samples: chain.n_kept(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub mean: f64,
    pub std: f64,
    pub ci95: Interval,
    pub ci99: Interval,
}

impl Marginal {
    pub fn from_samples(mut xs: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&xs);
        xs.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&xs, p);
        Self {
            mean,
            std,
            ci95: Interval { lo: q(0.025), hi: q(0.975) },
            ci99: Interval { lo: q(0.005), hi: q(0.995) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub k: usize,
    pub re: Marginal,
    pub im: Marginal,
    /// Eigenvalue mapped from the posterior-mean parameters.
    pub mapped_mean: [f64; 2],
    /// `mean(mu) - mu(mean(theta))`.
    pub jensen_gap: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub params: Vec<Marginal>,
    pub modes: Vec<ModeSummary>,
}

pub const MIN_SUMMARY_SAMPLES: usize = 1000;

/// Marginal statistics of theta and of the eigenvalues it maps to, sample by sample.
pub fn posterior_summary(chain: &Chain, u_mean: f64, grid: &FourierGrid) -> Result<PosteriorSummary> {
    if chain.n_kept() < MIN_SUMMARY_SAMPLES {
        return Err(Error::DegenerateChain(format!(
            "{} post-burn-in samples, need {MIN_SUMMARY_SAMPLES}",
            chain.n_kept()
        )));
    }
    let params: Vec<Marginal> = (0..chain.dim).map(|j| Marginal::from_samples(chain.column(j))).collect();
    let h = chain.dim / 2;
    let modes = (0..h)
        .map(|j| {
            let adv = u_mean * grid.wavenumber(j + 1);
            let mus: Vec<Complex64> = chain.post_burn_in().map(|r| map_eigenvalue(r[j], r[h + j], adv)).collect();
            let re = Marginal::from_samples(mus.iter().map(|m| m.re).collect());
            let im = Marginal::from_samples(mus.iter().map(|m| m.im).collect());
            let mm = map_eigenvalue(params[j].mean, params[h + j].mean, adv);
            ModeSummary {
                k: j + 1,
                jensen_gap: [re.mean - mm.re, im.mean - mm.im],
                mapped_mean: [mm.re, mm.im],
                re,
                im,
            }
        })
        .collect();
    Ok(PosteriorSummary {
        names: chain.names.clone(),
        params,
        modes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major; NaN wherever a zero-variance column is involved.
    pub values: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    /// Mean `|rho|` over defined off-diagonal entries.
    pub fn mean_abs_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let vals: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .filter(|v| v.is_finite())
            .collect();
        vals.iter().map(|v| v.abs()).sum::<f64>() / vals.len().max(1) as f64
    }
}

/// Pearson correlations of row-major `rows x dim` samples.
pub fn correlation_from_samples(samples: &[f64], dim: usize, names: Vec<String>) -> CorrelationMatrix {
    let n = samples.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in samples.chunks(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; dim * dim];
    for row in samples.chunks(dim) {
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in i..dim {
                cov[i * dim + j] += di * (row[j] - mean[j]);
            }
        }
    }
    // Round-off alone can leave a constant column with a tiny positive variance.
    let degenerate: Vec<bool> = (0..dim)
        .map(|i| !(cov[i * dim + i] > n as f64 * (1e-12 * mean[i].abs()).powi(2)))
        .collect();
    let mut values = vec![f64::NAN; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            if degenerate[i] || degenerate[j] {
                continue;
            }
            let r = if i == j {
                1.0
            } else {
                (cov[i * dim + j] / (cov[i * dim + i] * cov[j * dim + j]).sqrt()).clamp(-1.0, 1.0)
            };
            values[i * dim + j] = r;
            values[j * dim + i] = r;
        }
    }
    CorrelationMatrix { names, values, degenerate }
}

pub fn correlation_matrix(chain: &Chain) -> CorrelationMatrix {
    correlation_from_samples(&chain.samples[chain.burn_in * chain.dim..], chain.dim, chain.names.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictive {
    pub n_draws: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub const DEFAULT_PREDICTIVE_DRAWS: usize = 500;

/// Row indices of `n_draws` equally spaced post-burn-in samples.
pub fn thinned_rows(chain: &Chain, n_draws: usize) -> Result<Vec<usize>> {
    let kept = chain.n_kept();
    if n_draws == 0 || n_draws > kept {
        return Err(Error::InvalidParameter(format!(
            "cannot take {n_draws} draws from {kept} post-burn-in samples"
        )));
    }
    Ok((0..n_draws).map(|i| chain.burn_in + i * kept / n_draws).collect())
}

/// Pointwise statistics of `model(theta)` over thinned posterior draws.
pub fn posterior_predictive<F>(chain: &Chain, n_draws: usize, model: F) -> Result<Predictive>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let rows = thinned_rows(chain, n_draws)?;
    let outputs = rows
        .par_iter()
        .map(|&i| model(chain.row(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_draws(&outputs))
}

pub fn summarize_draws(outputs: &[Vec<f64>]) -> Predictive {
    let m = outputs[0].len();
    let n = outputs.len();
    let mut mean = vec![0.0; m];
    let mut min = vec![f64::INFINITY; m];
    let mut max = vec![f64::NEG_INFINITY; m];
    for o in outputs {
        for j in 0..m {
            mean[j] += o[j] / n as f64;
            min[j] = min[j].min(o[j]);
            max[j] = max[j].max(o[j]);
        }
    }
    let std = (0..m)
        .map(|j| {
            if n < 2 {
                0.0
            } else {
                (outputs.iter().map(|o| (o[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        })
        .collect();
    Predictive {
        n_draws: n,
        mean,
        std,
        min,
        max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn chain_from(samples: Vec<f64>, dim: usize, burn_in: usize) -> Chain {
        let n = samples.len() / dim;
        Chain {
            names: (0..dim).map(|i| format!("p{i}")).collect(),
            dim,
            samples,
            log_post: vec![0.0; n],
            burn_in,
            accepted_first: 0,
            accepted_second: 0,
            adaptations: vec![],
        }
    }

    #[test]
    fn kl_between_shifted_unit_gaussians() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 1.0 + z }).collect();
        let (kl, _, _) = kl_gaussian_approx(&xs, |x| -0.5 * (2.0 * PI).ln() - 0.5 * x * x).unwrap();
        assert!((kl - 0.5).abs() < 0.02, "{kl}");
    }

    #[test]
    fn kl_rejects_constant_marginal() {
        assert!(matches!(kl_gaussian_approx(&[1.0; 10], |_| 0.0), Err(Error::DegenerateChain(_))));
    }

    #[test]
    fn correlation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Vec::new();
        for _ in 0..10_000 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            s.extend_from_slice(&[a, b, a, 3.0]);
        }
        let c = correlation_from_samples(&s, 4, vec!["a".into(), "b".into(), "a2".into(), "k".into()]);
        assert!(c.get(0, 1).abs() < 0.05);
        assert!((c.get(0, 2) - 1.0).abs() < 1e-12);
        assert_eq!(c.get(0, 0), 1.0);
        assert!(c.get(3, 0).is_nan() && c.degenerate[3]);
        assert_eq!(c.get(1, 0), c.get(0, 1));
    }

    #[test]
    fn summary_of_constant_chain() {
        let c = chain_from(vec![0.1, -0.2].repeat(2000), 2, 500);
        let g = FourierGrid::new(4.0, 512).unwrap();
        let s = posterior_summary(&c, 1.0, &g).unwrap();
        assert!(s.params[0].std < 1e-12);
        assert_eq!(s.params[0].ci95.lo, s.params[0].ci95.hi);
        assert!(s.modes[0].jensen_gap[0].abs() < 1e-12);
    }

    #[test]
    fn jensen_gap_is_nonzero_for_spread_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..4000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.5 * z }).collect();
        let c = chain_from(s, 2, 0);
        let g = FourierGrid::new(4.0, 512).unwrap();
        let sum = posterior_summary(&c, 1.0, &g).unwrap();
        // E[-e^r] < -e^{E r}
        assert!(sum.modes[0].jensen_gap[0] < -1e-3);
    }

    #[test]
    fn single_draw_has_zero_spread() {
        let c = chain_from((0..200).map(|i| i as f64).collect(), 2, 10);
        let p = posterior_predictive(&c, 1, |th| Ok(vec![th[0], th[1] * 2.0])).unwrap();
        assert_eq!(p.std, vec![0.0, 0.0]);
        assert!(posterior_predictive(&c, 1000, |th| Ok(th.to_vec())).is_err());
    }
}
