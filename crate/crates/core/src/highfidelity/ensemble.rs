//! Ensemble of independent high-fidelity realizations and the sample
//! statistics of their depth averages.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::darcy::{solve_darcy, SolverOptions};
use super::grf::{GrfConfig, GrfSampler};
use super::transport::{extrude, Transport};
use super::{depth_average, Grid2d};
use crate::error::{Error, Result};
use crate::spectral::InitialCondition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HifiConfig {
    pub grid: Grid2d,
    pub grf: GrfConfig,
    pub u_mean: f64,
    pub nu_p: f64,
    pub initial: InitialCondition,
    pub solver: SolverOptions,
}

impl HifiConfig {
    /// Desk-scale channel: 4 x 1, 256 x 32 cells, Peclet number 100.
    pub fn desk() -> Self {
        Self {
            grid: Grid2d {
                lx: 4.0,
                ly: 1.0,
                nx: 256,
                ny: 32,
            },
            grf: GrfConfig::default(),
            u_mean: 1.0,
            nu_p: 0.01,
            initial: InitialCondition {
                center: 1.0,
                width: 0.1,
            },
            solver: SolverOptions::default(),
        }
    }

    pub fn paper() -> Self {
        Self {
            grid: Grid2d {
                nx: 512,
                ny: 64,
                ..Self::desk().grid
            },
            ..Self::desk()
        }
    }
}

/// Depth-averaged profiles of one realization at each requested time.
pub fn run_member(config: &HifiConfig, sampler: &GrfSampler, seed: u64, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let g = config.grid;
    let kappa: Vec<f64> = sampler.sample(seed).iter().map(|v| v.exp()).collect();
    let vel = solve_darcy(g, &kappa, config.u_mean, &config.solver)?;
    let tr = Transport::new(&vel, config.nu_p)?;
    let mut c = extrude(&g, |x| config.initial.value(x));
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        tr.advance(&mut c, t - now, None)?;
        now = t;
        out.push(depth_average(&g, &c));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_members: usize,
    pub t_obs: f64,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    /// Row-major sample covariance (denominator `N - 1`).
    pub covariance: Vec<f64>,
}

impl EnsembleStats {
    pub fn from_members(profiles: &[Vec<f64>], x: Vec<f64>, t_obs: f64) -> Result<Self> {
        let n = profiles.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least two members, got {n}")));
        }
        let m = profiles[0].len();
        let mut mean = vec![0.0; m];
        for p in profiles {
            for (a, v) in mean.iter_mut().zip(p) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n as f64);
        let mut covariance = vec![0.0; m * m];
        for p in profiles {
            let d: Vec<f64> = p.iter().zip(&mean).map(|(v, m)| v - m).collect();
            for i in 0..m {
                let row = &mut covariance[i * m..(i + 1) * m];
                for (c, dj) in row.iter_mut().zip(&d) {
                    *c += d[i] * dj;
                }
            }
        }
        covariance.iter_mut().for_each(|c| *c /= (n - 1) as f64);
        Ok(Self {
            n_members: n,
            t_obs,
            x,
            mean,
            covariance,
        })
    }

    pub fn variance(&self) -> Vec<f64> {
        let m = self.mean.len();
        (0..m).map(|i| self.covariance[i * m + i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberFailure {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub seeds: Vec<u64>,
    pub failures: Vec<MemberFailure>,
    /// One entry per observation time.
    pub stats: Vec<EnsembleStats>,
}

/// Runs one member per seed; failed members are logged and left out.
pub fn run_ensemble(config: &HifiConfig, seeds: &[u64], times: &[f64]) -> Result<EnsembleRun> {
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least two members, got {}", seeds.len())));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidParameter("observation times must be non-negative and sorted".into()));
    }
    let sampler = GrfSampler::new(config.grid, &config.grf)?;
    let results: Vec<Result<Vec<Vec<f64>>>> = seeds
        .par_iter()
        .map(|&s| run_member(config, &sampler, s, times))
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (&seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(p) => ok.push(p),
            Err(e) => {
                warn!("ensemble member {seed} failed: {e}");
                failures.push(MemberFailure {
                    seed,
                    reason: e.to_string(),
                });
            }
        }
    }
    if ok.len() < 2 {
        let f = failures.first().cloned().unwrap_or(MemberFailure {
            seed: 0,
            reason: "no members".into(),
        });
        return Err(Error::MemberFailed {
            seed: f.seed,
            reason: f.reason,
        });
    }
    let x = config.grid.xs();
    let stats = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let profiles: Vec<Vec<f64>> = ok.iter().map(|p| p[k].clone()).collect();
            EnsembleStats::from_members(&profiles, x.clone(), t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleRun {
        seeds: seeds.to_vec(),
        failures,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HifiConfig {
        HifiConfig {
            grid: Grid2d::new(4.0, 1.0, 64, 16).unwrap(),
            ..HifiConfig::desk()
        }
    }

    #[test]
    fn identical_members_have_zero_covariance() {
        let r = run_ensemble(&small(), &[7, 7], &[0.1]).unwrap();
        assert!(r.stats[0].covariance.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn members_are_reproducible_and_pulse_moves_downstream() {
        let cfg = small();
        let r = run_ensemble(&cfg, &[1, 2, 3, 4], &[0.0, 0.4]).unwrap();
        let sampler = GrfSampler::new(cfg.grid, &cfg.grf).unwrap();
        let solo = run_member(&cfg, &sampler, 3, &[0.0, 0.4]).unwrap();
        let again = run_member(&cfg, &sampler, 3, &[0.0, 0.4]).unwrap();
        assert_eq!(solo, again);
        let com = |s: &EnsembleStats| {
            s.x.iter().zip(&s.mean).map(|(x, c)| x * c).sum::<f64>() / s.mean.iter().sum::<f64>()
        };
        assert!(com(&r.stats[1]) > com(&r.stats[0]) + 0.2);
        let cov = &r.stats[1].covariance;
        let m = r.stats[1].mean.len();
        for i in 0..m {
            for j in 0..m {
                assert_eq!(cov[i * m + j], cov[j * m + i]);
            }
        }
    }

    #[test]
    fn rejects_single_member() {
        assert!(run_ensemble(&small(), &[1], &[0.4]).is_err());
    }
}
