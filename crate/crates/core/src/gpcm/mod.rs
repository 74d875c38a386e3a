//! Gaussian parsimonious clustering models: densities, constrained
//! M-steps, EM fitting, parameter counts and BIC.

mod density;
mod em;
mod init;
mod mstep;
mod params;
mod structure;

pub use density::{component_density, log_component_density, log_sum_exp, GaussianTerm};
pub use em::{bic, em_fit, EmConfig, FitResult, InitSpec, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use init::{kmeans_partition, LLOYD_ITERATIONS};
pub use mstep::{m_step, m_step_exact, min_rcond, EMPTY_MASS_FRACTION, INNER_MAX_ITER, INNER_TOL, RIDGE_FRACTION};
pub use params::{e_step, e_step_with_loglik, log_likelihood, Decomposition, MixtureParams, SoftAssignment};
pub use structure::{free_param_count, CovStructure};
