//! Learning a one-hidden-layer sigmoid network on Gaussian-mixture data with
//! group structure: data model, cross-entropy ERM via gradient descent,
//! moment-tensor initialization, curvature/rate predictions, and the sweep
//! harness that reproduces the synthetic experiments.

pub mod error;
pub mod mixture;
pub mod risk;
pub mod teacher;
pub mod tensor3;
pub mod tensorinit;
pub mod theory;
pub mod train;
pub mod util;

pub mod sweep;

pub use error::{Error, Result};
pub use mixture::{GroupedSample, MixtureJson, MixtureParams, Score3, Symmetry};
pub use risk::{aligned_error, empirical_grad, empirical_hessian, empirical_risk, grad, group_risk,
    hessian, loss, population_risk, AlignedError, RiskEval};
pub use teacher::{forward, sigmoid, spectral_stats, Dataset, LabeledSample, SpectralStats,
    TeacherJson, TeacherModel};
pub use tensor3::{sym_outer, tilde_outer, Tensor3};
pub use tensorinit::{estimate_moments, tensor_init, InitResult, MomentEstimates, TensorInitConfig,
    ThreeWaySplit};
pub use theory::{alpha_beta, d_function, gamma, rho, theory_report, TheoryReport};
pub use train::{auto_step_size, fit_geometric_rate, fit_rate, gd_train, local_random_init,
    trial_success, trial_success_fail_fast, RateFit, TrainConfig, TrainTrace, TrialOutcome};
