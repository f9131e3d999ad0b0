//! Unnormalized log-posterior over the inferred head of the spectrum.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{ForwardModel, HeadForward};
use crate::likelihood::GaussianLikelihood;
use crate::observations::ObservationSet;
use crate::operator::{head_eigenvalues, theta_names, SpectrumParams};
use crate::prior::PriorSpec;
use crate::spectral::FourierGrid;

/// A log-density over `R^dim`; non-finite values mean zero density.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.1)(x)
    }
}

#[derive(Debug, Clone)]
pub struct Posterior {
    forward: HeadForward,
    data: Vec<f64>,
    likelihood: GaussianLikelihood,
    prior: PriorSpec,
    grid: FourierGrid,
    u_mean: f64,
    /// Full spectrum with the tail that stays fixed.
    reference: Vec<Complex64>,
}

impl Posterior {
    /// `reference` supplies the frozen eigenvalues outside `1..=prior.head()`.
    pub fn new(forward: &ForwardModel, reference: &[Complex64], obs: &ObservationSet, prior: PriorSpec) -> Result<Self> {
        if obs.points.as_slice() != forward.points() {
            return Err(Error::InvalidParameter("forward model and observations disagree on points".into()));
        }
        let head = prior.head();
        if head == 0 {
            return Err(Error::InvalidParameter("posterior needs at least one inferred mode".into()));
        }
        Ok(Self {
            forward: forward.with_frozen_tail(reference, head)?,
            data: obs.values.clone(),
            likelihood: GaussianLikelihood::new(&obs.noise, obs.len())?,
            grid: *forward.grid(),
            u_mean: forward.u_mean(),
            reference: reference[..forward.n_modes()].to_vec(),
            prior,
        })
    }

    pub fn head(&self) -> usize {
        self.prior.head()
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn likelihood(&self) -> &GaussianLikelihood {
        &self.likelihood
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn names(&self) -> Vec<String> {
        theta_names(self.head())
    }

    pub fn predict(&self, theta: &[f64]) -> Vec<f64> {
        self.forward
            .evaluate(&head_eigenvalues(theta, self.u_mean, &self.grid))
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.likelihood.log_likelihood(&self.data, &self.predict(theta))
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        self.prior.log_prior_theta(theta)
    }

    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        if theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let lp = self.log_prior(theta) + self.log_likelihood(theta);
        if lp.is_finite() {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Theta of the reference spectrum's head.
    pub fn reference_theta(&self) -> Result<Vec<f64>> {
        Ok(self.params_from_reference()?.theta())
    }

    fn params_from_reference(&self) -> Result<SpectrumParams> {
        SpectrumParams::from_spectrum(&self.reference, self.head(), self.reference.len(), self.u_mean, self.grid)
    }

    /// Full parameter set at `theta`, tail included.
    pub fn params(&self, theta: &[f64]) -> Result<SpectrumParams> {
        self.params_from_reference()?.with_theta(theta)
    }
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        2 * self.head()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations::{spatial_series, NoiseModel, SeriesKind};
    use crate::operator::assemble_spectrum;
    use crate::prior::DEFAULT_DECAY_FACTOR;
    use crate::spectral::{frade_eigenvalues, transform_initial_condition, FradeParams, InitialCondition};

    #[test]
    fn posterior_is_prior_plus_likelihood() {
        let g = FourierGrid::new(4.0, 512).unwrap();
        let s = transform_initial_condition(&InitialCondition::new(1.0, 0.1).unwrap(), &g).unwrap();
        let mu = frade_eigenvalues(&FradeParams::new(1.5, 0.05, 1.0).unwrap(), &g).unwrap();
        let pts = spatial_series(64, 4.0, 0.5);
        let fm = ForwardModel::new(&s, 1.0, 47, pts.clone()).unwrap();
        let vals = fm.evaluate(&mu).unwrap();
        let obs = ObservationSet::new(pts, vals, NoiseModel::IidGaussian { sigma: 0.005 }, SeriesKind::Spatial).unwrap();
        let prior = PriorSpec::new(&g, 1.0, DEFAULT_DECAY_FACTOR, 4).unwrap();
        let post = Posterior::new(&fm, &mu, &obs, prior).unwrap();
        let truth = post.reference_theta().unwrap();
        for shift in [0.0, 0.1, -0.3] {
            let th: Vec<f64> = truth.iter().map(|v| v + shift).collect();
            let d = post.log_posterior(&th) - post.log_prior(&th) - post.log_likelihood(&th);
            assert_eq!(d, 0.0);
        }
        // Zero misfit at the truth.
        let ll = post.log_likelihood(&truth);
        assert!((ll - post.likelihood().log_normalization()).abs() < 1e-6);
        let p = post.params(&truth).unwrap();
        let full = fm.evaluate(assemble_spectrum(&p).mu()).unwrap();
        for (a, b) in full.iter().zip(post.predict(&truth)) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(post.log_posterior(&[f64::NAN; 8]), f64::NEG_INFINITY);
    }
}
