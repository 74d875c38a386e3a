//! Model-based clustering with Gaussian parsimonious mixtures, averaged
//! over the models in Occam's window.
//!
//! The pipeline fits a grid of covariance structures and component counts
//! ([`sweep`]), keeps the models whose BIC is close to the best one
//! ([`occam`]), and combines them into a single clustering either by
//! averaging membership probabilities, merging components where the
//! models disagree on `G` ([`merge`]), or by averaging the parameters of
//! the equal-`G` models ([`averaging`]). [`report`] runs the whole chain
//! and records it as JSON; [`simgen`] draws labeled synthetic data; [`ari`]
//! compares partitions.

pub mod ari;
pub mod averaging;
pub mod data;
pub mod error;
pub mod gpcm;
pub mod merge;
pub mod occam;
pub mod report;
pub mod simgen;
pub mod sweep;

pub use ari::{adjusted_rand_index, contingency, rand_index, ContingencyTable};
pub use averaging::{average_models, average_posteriors, harden, match_components, ComponentMatching};
pub use data::{Dataset, Partition};
pub use error::{Error, Result};
pub use gpcm::{bic, e_step, em_fit, CovStructure, EmConfig, FitResult, InitSpec, MixtureParams, SoftAssignment};
pub use merge::{best_merge, brute_force_merge_oracle, MergeMap, MergedModel};
pub use occam::{bma_weights, occam_window, select_reference, ReferencePolicy, WindowSet};
pub use report::{run_pipeline, PipelineConfig, RunReport};
pub use sweep::{run_sweep, SweepConfig, SweepResult};
