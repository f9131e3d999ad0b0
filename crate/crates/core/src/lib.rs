//! Bayesian inference of the Fourier spectrum of an uncertain linear transport
//! operator from sparse observations of a mean concentration field.

pub mod campaign;
pub mod diagnostics;
pub mod dram;
pub mod error;
pub mod forward;
pub mod highfidelity;
pub mod likelihood;
pub mod observations;
pub mod operator;
pub mod optimize;
pub mod posterior;
pub mod prior;
pub mod report;
pub mod sensitivity;
pub mod spectral;

pub use dram::{run_dram, Chain, DramConfig};
pub use error::{Error, Result};
pub use forward::{ForwardModel, HeadForward, ObsPoint};
pub use likelihood::GaussianLikelihood;
pub use observations::{NoiseModel, ObservationSet, SeriesKind};
pub use operator::{assemble_spectrum, check_constraints, lambda_from_mu, OperatorSpectrum, SpectrumParams};
pub use optimize::{optimize_frade_mle, optimize_map, FradeFit};
pub use posterior::{LogDensity, Posterior};
pub use prior::PriorSpec;
pub use sensitivity::{screen_eigenvalues, select_inferred_set, sobol_total_effect, SensitivityResult};
pub use spectral::{frade_eigenvalues, transform_initial_condition, FourierGrid, FradeParams, InitialCondition, ModalState};
