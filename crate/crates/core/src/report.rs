//! End-to-end pipeline (sweep → window → averaging) and its JSON report.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ari::adjusted_rand_index;
use crate::averaging::{average_models, average_posteriors, harden, member_posteriors, ModelAverage, PosteriorAverage};
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::gpcm::{e_step, free_param_count, CovStructure, FitResult, SoftAssignment};
use crate::occam::{occam_window, ModelSummary, ReferencePolicy, WindowSet, DEFAULT_WINDOW_C};
use crate::sweep::{run_sweep, CellFailure, SweepConfig, SweepResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sweep: SweepConfig,
    /// Occam's window constant: models within `2 log c` of the best BIC.
    pub c: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sweep: SweepConfig::default(),
            c: DEFAULT_WINDOW_C,
        }
    }
}

/// One row of the BIC table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicRow {
    pub structure: CovStructure,
    pub g: usize,
    pub bic: f64,
    pub loglik: f64,
    pub free_params: usize,
    pub n_iter: usize,
    pub seed: u64,
}

impl BicRow {
    fn from_fit(f: &FitResult) -> Self {
        Self {
            structure: f.structure(),
            g: f.g(),
            bic: f.bic,
            loglik: f.loglik,
            free_params: f.rho,
            n_iter: f.n_iter,
            seed: f.seed,
        }
    }
}

/// Table of best-per-cell fits in ascending BIC order, plus failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub n: usize,
    pub p: usize,
    pub config: SweepConfig,
    pub bic_table: Vec<BicRow>,
    pub failures: Vec<CellFailure>,
    pub best: ModelSummary,
    pub best_ari: Option<f64>,
    /// Full fitted models, so averaging can resume from a saved sweep.
    pub sweep: SweepResult,
}

impl SweepReport {
    pub fn new(data: &Dataset, sweep: SweepResult) -> Result<Self> {
        let best = sweep.best_model()?;
        let best_summary = summary(best);
        let best_ari = match data.labels() {
            Some(_) => Some(adjusted_rand_index(&harden(&e_step(&best.params, data)?), &data.partition_from_labels()?)?),
            None => None,
        };
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").into(),
            n: data.n(),
            p: data.p(),
            config: sweep.config.clone(),
            bic_table: sweep.entries.iter().map(BicRow::from_fit).collect(),
            failures: sweep.failures.clone(),
            best: best_summary,
            best_ari,
            sweep,
        })
    }
}

fn summary(f: &FitResult) -> ModelSummary {
    ModelSummary {
        structure: f.structure(),
        g: f.g(),
        bic: f.bic,
    }
}

/// One model of a working subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub structure: CovStructure,
    pub g: usize,
    pub bic: f64,
    /// Weight renormalized over the working subset.
    pub weight: f64,
    /// One-based target cluster of each component, when merged.
    pub merge_map: Option<Vec<usize>>,
    pub merge_ari: Option<f64>,
    /// One-based component of this model matched to each reference
    /// component (or merged group).
    pub matching: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub policy: ReferencePolicy,
    pub reference: ModelSummary,
    pub members: Vec<MemberReport>,
}

/// Soft and hard assignments of one clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub g: usize,
    /// `n` rows of `G` membership probabilities.
    pub soft: Vec<Vec<f64>>,
    /// One-based MAP labels.
    pub hard: Vec<usize>,
    pub ari: Option<f64>,
}

impl ClusteringReport {
    fn new(z: &SoftAssignment, truth: Option<&Partition>) -> Result<Self> {
        let hard = harden(z);
        let ari = truth.map(|t| adjusted_rand_index(&hard, t)).transpose()?;
        Ok(Self {
            g: z.g(),
            soft: z.matrix().row_iter().map(|r| r.iter().copied().collect()).collect(),
            hard: hard.one_based(),
            ari,
        })
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.hard.iter().map(|&l| l - 1).collect(), self.g).expect("labels within 1..=G")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub structure: CovStructure,
    pub g: usize,
    pub bic: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clusterings {
    pub best: ClusteringReport,
    pub aap_case_i: ClusteringReport,
    pub aap_case_ii: ClusteringReport,
    pub model_average: ClusteringReport,
}

/// Self-contained record of one averaging run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub n: usize,
    pub p: usize,
    pub feature_names: Vec<String>,
    pub config: PipelineConfig,
    pub bic_table: Vec<BicRow>,
    pub failures: Vec<CellFailure>,
    pub window: Vec<WindowRow>,
    pub window_threshold: f64,
    pub case_i: CaseReport,
    pub case_ii: CaseReport,
    pub model_average: CaseReport,
    pub clusterings: Clusterings,
    /// True when the window holds only the best model, in which case every
    /// averaged clustering equals the best model's.
    pub singleton_window: bool,
    pub notes: Vec<String>,
}

fn case_report(window: &WindowSet<FitResult>, avg: &PosteriorAverage) -> CaseReport {
    CaseReport {
        policy: avg.policy,
        reference: summary(&window.members[avg.selection.reference].model),
        members: avg
            .members
            .iter()
            .map(|m| {
                let fit = &window.members[m.member].model;
                MemberReport {
                    structure: fit.structure(),
                    g: fit.g(),
                    bic: fit.bic,
                    weight: m.weight,
                    merge_map: m.merge.as_ref().map(|c| c.map.assignment().iter().map(|t| t + 1).collect()),
                    merge_ari: m.merge.as_ref().map(|c| c.ari),
                    matching: m.matching.permutation.iter().map(|t| t + 1).collect(),
                }
            })
            .collect(),
    }
}

fn ma_report(window: &WindowSet<FitResult>, ma: &ModelAverage) -> CaseReport {
    CaseReport {
        policy: ReferencePolicy::CaseI,
        reference: summary(&window.members[ma.selection.reference].model),
        members: ma
            .selection
            .subset
            .iter()
            .zip(&ma.selection.weights)
            .zip(&ma.matchings)
            .map(|((&i, &weight), matching)| {
                let fit = &window.members[i].model;
                MemberReport {
                    structure: fit.structure(),
                    g: fit.g(),
                    bic: fit.bic,
                    weight,
                    merge_map: None,
                    merge_ari: None,
                    matching: matching.permutation.iter().map(|t| t + 1).collect(),
                }
            })
            .collect(),
    }
}

/// Window, both posterior-averaging cases and model averaging, starting
/// from a finished sweep.
pub fn average_sweep(data: &Dataset, sweep: &SweepResult, c: f64) -> Result<RunReport> {
    let window = occam_window(sweep, c)?;
    let zs = member_posteriors(&window, data)?;
    let aap_i = average_posteriors(&window, ReferencePolicy::CaseI, &zs)?;
    let aap_ii = average_posteriors(&window, ReferencePolicy::CaseII, &zs)?;
    let ma = average_models(&window, data)?;
    let truth = data.labels().map(|_| data.partition_from_labels()).transpose()?;
    let truth = truth.as_ref();

    let best_z = &zs[window.reference_case_i];
    let singleton = window.len() == 1;
    let mut notes = Vec::new();
    if singleton {
        notes.push("only one model lies in Occam's window; every averaged clustering equals the best model".into());
    }
    if !sweep.failures.is_empty() {
        notes.push(format!("{} of {} cells produced no converged fit", sweep.failures.len(), sweep.cells_attempted()));
    }

    Ok(RunReport {
        version: env!("CARGO_PKG_VERSION").into(),
        n: data.n(),
        p: data.p(),
        feature_names: data.feature_names().to_vec(),
        config: PipelineConfig {
            sweep: sweep.config.clone(),
            c,
        },
        bic_table: sweep.entries.iter().map(BicRow::from_fit).collect(),
        failures: sweep.failures.clone(),
        window: window
            .members
            .iter()
            .map(|m| WindowRow {
                structure: m.model.structure(),
                g: m.model.g(),
                bic: m.model.bic,
                weight: m.weight,
            })
            .collect(),
        window_threshold: crate::occam::window_threshold(c),
        case_i: case_report(&window, &aap_i),
        case_ii: case_report(&window, &aap_ii),
        model_average: ma_report(&window, &ma),
        clusterings: Clusterings {
            best: ClusteringReport::new(best_z, truth)?,
            aap_case_i: ClusteringReport::new(&aap_i.z, truth)?,
            aap_case_ii: ClusteringReport::new(&aap_ii.z, truth)?,
            model_average: ClusteringReport::new(&ma.z, truth)?,
        },
        singleton_window: singleton,
        notes,
    })
}

/// Sweep followed by [`average_sweep`].
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<RunReport> {
    let sweep = run_sweep(data, &cfg.sweep)?;
    if sweep.entries.is_empty() {
        return Err(Error::AllCellsFailed);
    }
    average_sweep(data, &sweep, cfg.c)
}

/// Checks a reported BIC table against the free-parameter formula, a
/// cheap consistency check for reports loaded from disk.
pub fn check_bic_table(report: &RunReport) -> bool {
    report
        .bic_table
        .iter()
        .all(|r| r.free_params == free_param_count(r.structure, r.g, report.p))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
