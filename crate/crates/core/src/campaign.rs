//! End-to-end campaigns: data generation, screening, the two optimizations,
//! sampling and post-processing. Each stage is a separate function so callers
//! can persist artifacts between them.

use log::info;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    correlation_matrix, kl_divergence, posterior_predictive, posterior_summary, CorrelationMatrix, KlReport, Predictive,
    PosteriorSummary, DEFAULT_PREDICTIVE_DRAWS,
};
use crate::dram::{run_dram, Chain, DramConfig};
use crate::error::{Error, Result};
use crate::forward::{ForwardModel, ObsPoint};
use crate::highfidelity::darcy::SolverOptions;
use crate::highfidelity::ensemble::{run_ensemble, EnsembleRun, EnsembleStats, HifiConfig};
use crate::highfidelity::grf::GrfConfig;
use crate::highfidelity::Grid2d;
use crate::likelihood::{mean_covariance, DEFAULT_VARIANCE_FLOOR};
use crate::observations::{spatial_series, time_series, NoiseModel, ObservationSet, SeriesKind};
use crate::operator::{head_eigenvalues, OperatorSpectrum, SpectrumRecord};
use crate::optimize::{frade_reference, optimize_frade_mle, optimize_map, FradeFit, NelderMeadOptions};
use crate::posterior::Posterior;
use crate::prior::{PriorSpec, DEFAULT_DECAY_FACTOR};
use crate::sensitivity::{screen_eigenvalues, select_inferred_set, Selection, SensitivityResult, DEFAULT_BASE_SAMPLES, DEFAULT_THRESHOLD};
use crate::spectral::{
    frade_eigenvalues, transform_initial_condition, FourierGrid, FradeParams, InitialCondition, ModalState,
    EXCITATION_THRESHOLD,
};

/// Noise level assumed by the likelihood when the data were generated noiseless.
pub const DEFAULT_SIGMA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Synthetic data from a fractional advection-diffusion model.
    #[default]
    Frade,
    /// Ensemble-averaged two-dimensional Darcy transport.
    Hifi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub length: f64,
    pub n_points: usize,
    pub u_mean: f64,
    /// Molecular diffusivity of the underlying two-dimensional problem.
    pub nu_p: f64,
    pub initial: InitialCondition,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            length: 4.0,
            n_points: 512,
            u_mean: 1.0,
            nu_p: 0.01,
            initial: InitialCondition {
                center: 1.0,
                width: 0.1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub series: SeriesKind,
    pub n_obs: usize,
    /// Observation time of a spatial series.
    pub t_obs: f64,
    /// Observation location of a time series.
    pub x_obs: f64,
    /// Time series span `[0, t_end]`.
    pub t_end: f64,
    /// Standard deviation of the added noise; zero gives exact model output.
    pub sigma: f64,
    /// Noise level the likelihood assumes; defaults to `sigma`.
    pub likelihood_sigma: Option<f64>,
    pub alpha: f64,
    pub nu: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            series: SeriesKind::Spatial,
            n_obs: 512,
            t_obs: 0.5,
            x_obs: 2.0,
            t_end: 4.0,
            sigma: 0.005,
            likelihood_sigma: None,
            alpha: 1.5,
            nu: 0.05,
        }
    }
}

impl DataConfig {
    pub fn points(&self, length: f64) -> Result<Vec<ObsPoint>> {
        if self.n_obs == 0 {
            return Err(Error::InvalidParameter("need at least one observation".into()));
        }
        match self.series {
            SeriesKind::Spatial => {
                if !(self.t_obs >= 0.0 && self.t_obs.is_finite()) {
                    return Err(Error::InvalidParameter(format!("observation time {} is invalid", self.t_obs)));
                }
                Ok(spatial_series(self.n_obs, length, self.t_obs))
            }
            SeriesKind::Time => {
                if !(0.0..=length).contains(&self.x_obs) {
                    return Err(Error::InvalidParameter(format!("observation location {} outside the domain", self.x_obs)));
                }
                if !(self.t_end > 0.0 && self.t_end.is_finite()) {
                    return Err(Error::InvalidParameter(format!("series end {} must be positive", self.t_end)));
                }
                Ok(time_series(self.n_obs, self.x_obs, self.t_end))
            }
        }
    }

    pub fn noise_sigma(&self) -> f64 {
        match self.likelihood_sigma {
            Some(s) => s,
            None if self.sigma > 0.0 => self.sigma,
            None => DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HifiDataConfig {
    pub nx: usize,
    pub ny: usize,
    pub ly: f64,
    pub grf: GrfConfig,
    pub n_members: usize,
    /// Evenly spaced observation points taken from the `nx` columns.
    pub n_obs: usize,
    /// Calibration time.
    pub t_obs: f64,
    /// Held-out time for the extrapolation check.
    pub t_extrapolate: f64,
    pub variance_floor: f64,
    pub solver: SolverOptions,
}

impl Default for HifiDataConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl HifiDataConfig {
    pub fn desk() -> Self {
        Self {
            nx: 256,
            ny: 32,
            ly: 1.0,
            grf: GrfConfig::default(),
            n_members: 64,
            n_obs: 64,
            t_obs: 0.4,
            t_extrapolate: 1.0,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            solver: SolverOptions::default(),
        }
    }

    pub fn paper() -> Self {
        Self {
            nx: 512,
            ny: 64,
            n_members: 576,
            n_obs: 512,
            ..Self::desk()
        }
    }

    pub fn solver_config(&self, model: &ModelConfig) -> Result<HifiConfig> {
        Ok(HifiConfig {
            grid: Grid2d::new(model.length, self.ly, self.nx, self.ny)?,
            grf: self.grf,
            u_mean: model.u_mean,
            nu_p: model.nu_p,
            initial: model.initial,
            solver: self.solver,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub decay_factor: f64,
    /// Overrides the diffusivity bound derived from the domain.
    pub nu_max: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            decay_factor: DEFAULT_DECAY_FACTOR,
            nu_max: None,
        }
    }
}

impl PriorConfig {
    pub fn build(&self, grid: &FourierGrid, u_mean: f64, head: usize) -> Result<PriorSpec> {
        match self.nu_max {
            Some(v) => PriorSpec::with_nu_max(grid, u_mean, self.decay_factor, v, head),
            None => PriorSpec::new(grid, u_mean, self.decay_factor, head),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityConfig {
    pub n_base: usize,
    pub threshold: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            n_base: DEFAULT_BASE_SAMPLES,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub n_draws: usize,
    /// Times at which whole-domain predictive profiles are drawn.
    pub predict_times: Vec<f64>,
    pub predict_points: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            n_draws: DEFAULT_PREDICTIVE_DRAWS,
            predict_times: vec![0.5, 1.0, 2.0, 4.0],
            predict_points: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub case: Case,
    /// Every stage seed is derived from this one.
    pub seed: u64,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub hifi: HifiDataConfig,
    pub prior: PriorConfig,
    pub sensitivity: SensitivityConfig,
    pub optimizer: NelderMeadOptions,
    pub sampler: DramConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (hifi, sampler) = match preset {
            Preset::Desk => (HifiDataConfig::desk(), DramConfig::desk()),
            Preset::Paper => (HifiDataConfig::paper(), DramConfig::default()),
        };
        Self {
            case: Case::Frade,
            seed: 1,
            model: ModelConfig::default(),
            data: DataConfig::default(),
            hifi,
            prior: PriorConfig::default(),
            sensitivity: SensitivityConfig::default(),
            optimizer: NelderMeadOptions::default(),
            sampler,
            diagnostics: DiagnosticsConfig::default(),
        }
    }

    pub fn grid(&self) -> Result<FourierGrid> {
        FourierGrid::new(self.model.length, self.model.n_points)
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::derive(self.seed)
    }
}

/// Independent seeds for the random stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub master: u64,
    pub noise: u64,
    pub screening: u64,
    pub sampler: u64,
    pub ensemble: u64,
}

impl StageSeeds {
    pub fn derive(master: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master);
        Self {
            master,
            noise: rng.next_u64(),
            screening: rng.next_u64(),
            sampler: rng.next_u64(),
            ensemble: rng.next_u64(),
        }
    }

    pub fn members(&self, n: usize) -> Vec<u64> {
        (0..n as u64).map(|i| self.ensemble.wrapping_add(i)).collect()
    }
}

/// Grid, initial state and observation operator shared by every stage.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: FourierGrid,
    pub initial: ModalState,
    /// Modes `0..n_modes` enter the synthesis.
    pub n_modes: usize,
    pub u_mean: f64,
    pub obs: ObservationSet,
    pub forward: ForwardModel,
}

impl Problem {
    pub fn new(model: &ModelConfig, obs: ObservationSet) -> Result<Self> {
        let grid = FourierGrid::new(model.length, model.n_points)?;
        let initial = transform_initial_condition(&model.initial, &grid)?;
        let n_modes = initial.excited_modes(EXCITATION_THRESHOLD).max(2);
        obs.check_domain(model.length)?;
        let forward = ForwardModel::new(&initial, model.u_mean, n_modes, obs.points.clone())?;
        Ok(Self {
            grid,
            initial,
            n_modes,
            u_mean: model.u_mean,
            obs,
            forward,
        })
    }

    pub fn forward_at(&self, points: Vec<ObsPoint>) -> Result<ForwardModel> {
        ForwardModel::new(&self.initial, self.u_mean, self.n_modes, points)
    }

    /// Truncated spectrum of the fractional operator with `(alpha, nu)`.
    pub fn frade_spectrum(&self, alpha: f64, nu: f64) -> Result<Vec<Complex64>> {
        let mut mu = frade_eigenvalues(&FradeParams::new(alpha, nu, self.u_mean)?, &self.grid)?;
        mu.truncate(self.n_modes);
        Ok(mu)
    }
}

/// Fractional-model data at the configured points, with seeded Gaussian noise.
pub fn generate_frade(config: &RunConfig, seed: u64) -> Result<ObservationSet> {
    let d = &config.data;
    if !(d.sigma >= 0.0 && d.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma must be non-negative, got {}", d.sigma)));
    }
    let points = d.points(config.model.length)?;
    let grid = config.grid()?;
    let initial = transform_initial_condition(&config.model.initial, &grid)?;
    let n_modes = initial.excited_modes(EXCITATION_THRESHOLD).max(2);
    let forward = ForwardModel::new(&initial, config.model.u_mean, n_modes, points.clone())?;
    let mu = frade_eigenvalues(&FradeParams::new(d.alpha, d.nu, config.model.u_mean)?, &grid)?;
    let mut values = forward.evaluate(&mu[..n_modes])?;
    if d.sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for v in values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += d.sigma * z;
        }
    }
    ObservationSet::new(
        points,
        values,
        NoiseModel::IidGaussian { sigma: d.noise_sigma() },
        d.series,
    )
}

/// Ensemble statistics turned into a data set: the sample mean at `n_obs`
/// evenly spaced columns with the floored covariance of that mean.
pub fn ensemble_observations(stats: &EnsembleStats, n_obs: usize, floor: f64) -> Result<ObservationSet> {
    let nx = stats.mean.len();
    if n_obs == 0 || nx % n_obs != 0 {
        return Err(Error::InvalidParameter(format!(
            "{n_obs} observation points do not evenly divide {nx} columns"
        )));
    }
    let stride = nx / n_obs;
    let idx: Vec<usize> = (0..n_obs).map(|i| i * stride).collect();
    let sub: Vec<f64> = idx
        .iter()
        .flat_map(|&a| idx.iter().map(move |&b| stats.covariance[a * nx + b]))
        .collect();
    let matrix = mean_covariance(&sub, n_obs, stats.n_members, floor);
    let points = idx.iter().map(|&i| ObsPoint::new(stats.x[i], stats.t_obs)).collect();
    ObservationSet::new(
        points,
        idx.iter().map(|&i| stats.mean[i]).collect(),
        NoiseModel::Covariance {
            matrix,
            variance_floor: floor,
        },
        SeriesKind::Spatial,
    )
}

#[derive(Debug, Clone)]
pub struct HifiData {
    pub run: EnsembleRun,
    /// Calibration data.
    pub calibration: ObservationSet,
    /// Held-out data at the extrapolation time.
    pub extrapolation: ObservationSet,
}

pub fn generate_hifi(config: &RunConfig, seeds: &StageSeeds) -> Result<HifiData> {
    let h = &config.hifi;
    if !(h.t_obs > 0.0 && h.t_extrapolate > h.t_obs) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < calibration time {} < extrapolation time {}",
            h.t_obs, h.t_extrapolate
        )));
    }
    let solver = h.solver_config(&config.model)?;
    info!(
        "running {} members on a {}x{} grid",
        h.n_members, solver.grid.nx, solver.grid.ny
    );
    let run = run_ensemble(&solver, &seeds.members(h.n_members), &[h.t_obs, h.t_extrapolate])?;
    let calibration = ensemble_observations(&run.stats[0], h.n_obs, h.variance_floor)?;
    let extrapolation = ensemble_observations(&run.stats[1], h.n_obs, h.variance_floor)?;
    Ok(HifiData {
        run,
        calibration,
        extrapolation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub result: SensitivityResult,
    pub selection: Selection,
}

pub fn run_screening(problem: &Problem, config: &RunConfig, seed: u64) -> Result<Screening> {
    let s = &config.sensitivity;
    let result = screen_eigenvalues(&problem.forward, config.prior.nu_max, config.prior.decay_factor, s.n_base, seed)?;
    let selection = select_inferred_set(&result, s.threshold);
    info!(
        "{} sensitive modes, inferring k = 1..={}",
        selection.sensitive_modes.len(),
        selection.head
    );
    Ok(Screening { result, selection })
}

/// Outcome of the two deterministic stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    pub head: usize,
    pub frade: FradeFit,
    /// Fractional-fit spectrum; supplies the fixed tail.
    pub reference: SpectrumRecord,
    pub start: Vec<f64>,
    pub start_log_post: f64,
    pub map: Vec<f64>,
    pub map_log_post: f64,
    pub map_converged: bool,
    pub evaluations: usize,
}

impl Optimization {
    pub fn reference_mu(&self) -> Result<Vec<Complex64>> {
        Ok(self.reference.to_spectrum()?.mu().to_vec())
    }
}

pub fn build_posterior(problem: &Problem, config: &RunConfig, head: usize, reference: &[Complex64]) -> Result<Posterior> {
    let prior = config.prior.build(&problem.grid, problem.u_mean, head)?;
    Posterior::new(&problem.forward, reference, &problem.obs, prior)
}

pub fn run_optimization(problem: &Problem, config: &RunConfig, head: usize) -> Result<(Optimization, Posterior)> {
    let frade = optimize_frade_mle(&problem.forward, &problem.obs, &config.optimizer)?;
    info!("fractional fit alpha = {:.5}, nu = {:.5}", frade.alpha, frade.nu);
    let reference = frade_reference(&frade, &problem.forward)?;
    let posterior = build_posterior(problem, config, head, &reference)?;
    let start = posterior.reference_theta()?;
    let start_log_post = posterior.log_posterior(&start);
    let map = optimize_map(&posterior, &start, &config.optimizer)?;
    info!("posterior maximum {:.6} (start {:.6})", map.value, start_log_post);
    let record = SpectrumRecord::from_spectrum(&OperatorSpectrum::new(reference, problem.grid), problem.u_mean);
    Ok((
        Optimization {
            head,
            frade,
            reference: record,
            start,
            start_log_post,
            map: map.x,
            map_log_post: map.value,
            map_converged: map.converged,
            evaluations: map.evaluations,
        },
        posterior,
    ))
}

pub fn run_sampling(posterior: &Posterior, start: &[f64], config: &RunConfig, seed: u64) -> Result<Chain> {
    let dram = DramConfig {
        seed,
        ..config.sampler
    };
    let chain = run_dram(posterior, start, posterior.names(), &dram)?;
    info!("chain acceptance {:.3}", chain.acceptance_rate());
    Ok(chain)
}

/// Posterior-predictive statistics over one set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSet {
    pub label: String,
    pub points: Vec<ObsPoint>,
    pub predictive: Predictive,
    /// Data or truth to compare against.
    pub data: Option<Vec<f64>>,
    /// Observation-noise variance at each point, when known.
    pub noise_variance: Option<Vec<f64>>,
    /// Prediction of the fractional fit alone.
    pub reference: Vec<f64>,
}

impl PredictiveSet {
    /// Spread of the predicted data: draw spread plus observation noise.
    pub fn total_std(&self) -> Vec<f64> {
        self.predictive
            .std
            .iter()
            .enumerate()
            .map(|(i, s)| (s * s + self.noise_variance.as_ref().map_or(0.0, |v| v[i])).sqrt())
            .collect()
    }

    /// `|mean - data| / total_std` per point.
    pub fn normalized_misfit(&self) -> Option<Vec<f64>> {
        let data = self.data.as_ref()?;
        Some(
            self.total_std()
                .iter()
                .zip(data.iter().zip(&self.predictive.mean))
                .map(|(s, (d, m))| (m - d).abs() / s)
                .collect(),
        )
    }

    /// Fraction of points whose data lie within `n_std` total std of the mean.
    pub fn coverage(&self, n_std: f64) -> Option<f64> {
        let z = self.normalized_misfit()?;
        Some(z.iter().filter(|v| **v <= n_std).count() as f64 / z.len() as f64)
    }
}

/// Draw-by-draw predictions at `points` with the tail held at `reference`.
pub fn predictive_at(
    problem: &Problem,
    posterior: &Posterior,
    reference: &[Complex64],
    chain: &Chain,
    n_draws: usize,
    label: &str,
    points: Vec<ObsPoint>,
) -> Result<PredictiveSet> {
    let fm = problem.forward_at(points.clone())?;
    let head = posterior.head();
    let hf = fm.with_frozen_tail(reference, head)?;
    let (u, grid) = (problem.u_mean, problem.grid);
    let predictive = posterior_predictive(chain, n_draws, |theta| Ok(hf.evaluate(&head_eigenvalues(theta, u, &grid))))?;
    Ok(PredictiveSet {
        label: label.to_string(),
        points,
        predictive,
        data: None,
        noise_variance: None,
        reference: fm.evaluate(reference)?,
    })
}

fn noise_variance(obs: &ObservationSet) -> Vec<f64> {
    let n = obs.len();
    match &obs.noise {
        NoiseModel::IidGaussian { sigma } => vec![sigma * sigma; n],
        NoiseModel::Covariance { matrix, .. } => (0..n).map(|i| matrix[i * n + i]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub kl: KlReport,
    pub summary: PosteriorSummary,
    pub correlation: CorrelationMatrix,
    pub predictive: Vec<PredictiveSet>,
}

/// Information gain, summaries, correlations and predictive envelopes.
///
/// `held_out` adds comparisons against further data sets (e.g. a later time).
pub fn run_diagnostics(
    problem: &Problem,
    posterior: &Posterior,
    reference: &[Complex64],
    chain: &Chain,
    config: &RunConfig,
    held_out: &[(&str, &ObservationSet)],
) -> Result<Diagnostics> {
    let kl = kl_divergence(chain, posterior.prior())?;
    let summary = posterior_summary(chain, problem.u_mean, &problem.grid)?;
    let correlation = correlation_matrix(chain);
    let n_draws = config.diagnostics.n_draws.min(chain.n_kept());

    let mut predictive = Vec::new();
    let mut fit = predictive_at(problem, posterior, reference, chain, n_draws, "fit", problem.obs.points.clone())?;
    fit.data = Some(problem.obs.values.clone());
    fit.noise_variance = Some(noise_variance(&problem.obs));
    predictive.push(fit);

    for (label, obs) in held_out {
        let mut p = predictive_at(problem, posterior, reference, chain, n_draws, label, obs.points.clone())?;
        p.data = Some(obs.values.clone());
        p.noise_variance = Some(noise_variance(obs));
        predictive.push(p);
    }

    let truth = match config.case {
        Case::Frade => Some(problem.frade_spectrum(config.data.alpha, config.data.nu)?),
        Case::Hifi => None,
    };
    let np = config.diagnostics.predict_points.max(1);
    let mut profiles = Vec::new();
    for &t in &config.diagnostics.predict_times {
        profiles.push((format!("profile_t{t}"), spatial_series(np, problem.grid.length(), t)));
    }
    if config.case == Case::Frade && config.data.series == SeriesKind::Time {
        // The same location followed well past the observed window.
        let d = &config.data;
        profiles.push((format!("series_x{}", d.x_obs), time_series(np, d.x_obs, 2.0 * d.t_end)));
    }
    for (label, points) in profiles {
        let mut p = predictive_at(problem, posterior, reference, chain, n_draws, &label, points)?;
        if let Some(mu) = &truth {
            p.data = Some(problem.forward_at(p.points.clone())?.evaluate(mu)?);
        }
        predictive.push(p);
    }

    Ok(Diagnostics {
        kl,
        summary,
        correlation,
        predictive,
    })
}

/// Every stage's output from one run held in memory.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub seeds: StageSeeds,
    pub problem: Problem,
    pub screening: Screening,
    pub optimization: Optimization,
    pub chain: Chain,
    pub diagnostics: Diagnostics,
}

/// Runs screening through diagnostics on an existing data set.
pub fn run_campaign(config: &RunConfig, obs: ObservationSet, held_out: &[(&str, &ObservationSet)]) -> Result<Campaign> {
    let seeds = config.seeds();
    let problem = Problem::new(&config.model, obs)?;
    let screening = run_screening(&problem, config, seeds.screening)?;
    let (optimization, posterior) = run_optimization(&problem, config, screening.selection.head)?;
    let chain = run_sampling(&posterior, &optimization.map, config, seeds.sampler)?;
    let reference = optimization.reference_mu()?;
    let diagnostics = run_diagnostics(&problem, &posterior, &reference, &chain, config, held_out)?;
    Ok(Campaign {
        seeds,
        problem,
        screening,
        optimization,
        chain,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(series: SeriesKind, n_obs: usize) -> RunConfig {
        let mut c = RunConfig::default();
        c.data.series = series;
        c.data.n_obs = n_obs;
        c.sensitivity.n_base = 64;
        c.sampler = DramConfig {
            n_steps: 3000,
            burn_in: 1000,
            ..DramConfig::desk()
        };
        c.diagnostics.n_draws = 50;
        c.diagnostics.predict_points = 32;
        c
    }

    #[test]
    fn stage_seeds_are_distinct_and_stable() {
        let s = StageSeeds::derive(7);
        assert_eq!(s, StageSeeds::derive(7));
        assert_ne!(s.noise, s.sampler);
        assert_ne!(s, StageSeeds::derive(8));
    }

    #[test]
    fn series_layouts() {
        let c = quick(SeriesKind::Spatial, 512);
        let obs = generate_frade(&c, 1).unwrap();
        assert_eq!(obs.len(), 512);
        assert_eq!(obs.points[0].x, 0.0);
        assert!(obs.points.last().unwrap().x < 4.0);
        let c = quick(SeriesKind::Time, 32);
        let obs = generate_frade(&c, 1).unwrap();
        assert_eq!(obs.points[0].t, 0.0);
        assert_eq!(obs.points[31].t, 4.0);
        assert!(obs.points.iter().all(|p| p.x == 2.0));
    }

    #[test]
    fn zero_sigma_reproduces_model_output() {
        let mut c = quick(SeriesKind::Spatial, 64);
        c.data.sigma = 0.0;
        let obs = generate_frade(&c, 1).unwrap();
        let p = Problem::new(&c.model, obs.clone()).unwrap();
        let model = p.forward.evaluate(&p.frade_spectrum(1.5, 0.05).unwrap()).unwrap();
        assert_eq!(obs.values, model);
        assert_eq!(obs.noise, NoiseModel::IidGaussian { sigma: DEFAULT_SIGMA });
    }

    #[test]
    fn ensemble_data_subsamples_columns() {
        let nx = 8;
        let stats = EnsembleStats {
            n_members: 4,
            t_obs: 0.4,
            x: (0..nx).map(|i| i as f64 * 0.5).collect(),
            mean: (0..nx).map(|i| i as f64).collect(),
            covariance: (0..nx * nx).map(|v| if v % (nx + 1) == 0 { 4.0 } else { 0.0 }).collect(),
        };
        let obs = ensemble_observations(&stats, 4, 1e-6).unwrap();
        assert_eq!(obs.values, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(obs.points[1].x, 1.0);
        match obs.noise {
            NoiseModel::Covariance { ref matrix, .. } => {
                assert_eq!(matrix.len(), 16);
                assert_eq!(matrix[0], 1.0);
                assert_eq!(matrix[1], 0.0);
            }
            _ => panic!("expected a covariance model"),
        }
        assert!(ensemble_observations(&stats, 3, 1e-6).is_err());
    }

    #[test]
    fn config_round_trips_and_fills_defaults() {
        let c = RunConfig::preset(Preset::Paper);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"case":"hifi","data":{"n_obs":32}}"#).unwrap();
        assert_eq!(partial.case, Case::Hifi);
        assert_eq!(partial.data.n_obs, 32);
        assert_eq!(partial.data.t_obs, 0.5);
    }

    #[test]
    fn small_campaign_runs_end_to_end() {
        let c = quick(SeriesKind::Spatial, 64);
        let obs = generate_frade(&c, c.seeds().noise).unwrap();
        let run = run_campaign(&c, obs, &[]).unwrap();
        let h = run.screening.selection.head;
        assert!(h >= 1 && h < run.problem.n_modes);
        assert!(run.optimization.map_log_post >= run.optimization.start_log_post);
        assert_eq!(run.chain.dim, 2 * h);
        assert_eq!(run.diagnostics.kl.entries.len(), 2 * h);
        assert_eq!(run.diagnostics.predictive.len(), 1 + c.diagnostics.predict_times.len());
        let again = run_campaign(&c, run.problem.obs.clone(), &[]).unwrap();
        assert_eq!(again.chain.samples, run.chain.samples);
    }
}
