//! Occam's window and Bayesian model-averaging weights.
//!
//! With equal prior model probabilities and the BIC approximation to the
//! integrated likelihood, the posterior weight of model `i` is
//! `exp(-BIC_i / 2) / Σ_k exp(-BIC_k / 2)`, and the window keeps models
//! with `BIC_i - min BIC ≤ 2 log c`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpcm::{CovStructure, FitResult};
use crate::sweep::{compare_fits, SweepResult};

pub const DEFAULT_WINDOW_C: f64 = 20.0;

/// Anything that can sit in a model window.
pub trait ModelCandidate {
    fn bic(&self) -> f64;
    fn n_components(&self) -> usize;
    fn structure(&self) -> CovStructure;
}

impl ModelCandidate for FitResult {
    fn bic(&self) -> f64 {
        self.bic
    }

    fn n_components(&self) -> usize {
        self.g()
    }

    fn structure(&self) -> CovStructure {
        self.params.structure
    }
}

/// A model known only by its label and BIC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub structure: CovStructure,
    pub g: usize,
    pub bic: f64,
}

impl ModelCandidate for ModelSummary {
    fn bic(&self) -> f64 {
        self.bic
    }

    fn n_components(&self) -> usize {
        self.g
    }

    fn structure(&self) -> CovStructure {
        self.structure
    }
}

impl From<&FitResult> for ModelSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            structure: f.structure(),
            g: f.g(),
            bic: f.bic,
        }
    }
}

/// Normalized `exp(-BIC/2)` weights, computed relative to the minimum BIC.
pub fn bma_weights(bics: &[f64]) -> Vec<f64> {
    let Some(min) = bics.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let raw: Vec<f64> = bics.iter().map(|b| (-(b - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Largest admissible BIC gap, `2 log c`.
pub fn window_threshold(c: f64) -> f64 {
    2.0 * c.ln()
}

/// Whether a BIC lies inside the window around `best_bic`.
pub fn in_window(bic: f64, best_bic: f64, c: f64) -> bool {
    bic - best_bic <= window_threshold(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMember<M> {
    pub model: M,
    pub weight: f64,
}

/// Models in Occam's window with their BMA weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet<M = FitResult> {
    pub members: Vec<WindowMember<M>>,
    pub c: f64,
    /// Index of the minimum-BIC member.
    pub reference_case_i: usize,
    /// Index of the fewest-components member.
    pub reference_case_ii: usize,
}

fn order_by_bic<M: ModelCandidate>(a: &M, b: &M) -> Ordering {
    a.bic()
        .total_cmp(&b.bic())
        .then(a.n_components().cmp(&b.n_components()))
        .then(a.structure().name().cmp(b.structure().name()))
}

fn order_by_components<M: ModelCandidate>(a: &M, b: &M) -> Ordering {
    a.n_components()
        .cmp(&b.n_components())
        .then(a.bic().total_cmp(&b.bic()))
        .then(a.structure().name().cmp(b.structure().name()))
}

impl<M: ModelCandidate> WindowSet<M> {
    /// Weights an explicit list of models without filtering it.
    pub fn from_members(models: Vec<M>, c: f64) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let bics: Vec<f64> = models.iter().map(ModelCandidate::bic).collect();
        let weights = bma_weights(&bics);
        let members: Vec<WindowMember<M>> = models
            .into_iter()
            .zip(weights)
            .map(|(model, weight)| WindowMember { model, weight })
            .collect();
        let argmin = |cmp: fn(&M, &M) -> Ordering| {
            (0..members.len())
                .min_by(|&i, &j| cmp(&members[i].model, &members[j].model))
                .expect("non-empty")
        };
        let reference_case_i = argmin(order_by_bic);
        let reference_case_ii = argmin(order_by_components);
        Ok(Self {
            members,
            c,
            reference_case_i,
            reference_case_ii,
        })
    }

    /// Keeps the models within `2 log c` of the best BIC.
    pub fn filter(models: Vec<M>, c: f64) -> Result<Self> {
        if !(c > 1.0) {
            return Err(Error::InvalidArgument(format!("window constant must exceed 1, got {c}")));
        }
        let best = models
            .iter()
            .map(ModelCandidate::bic)
            .reduce(f64::min)
            .ok_or(Error::EmptyWindow)?;
        let kept = models.into_iter().filter(|m| in_window(m.bic(), best, c)).collect();
        Self::from_members(kept, c)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    pub fn summaries(&self) -> Vec<ModelSummary> {
        self.members
            .iter()
            .map(|m| ModelSummary {
                structure: m.model.structure(),
                g: m.model.n_components(),
                bic: m.model.bic(),
            })
            .collect()
    }
}

/// Occam's window over the entries of a sweep.
pub fn occam_window(s: &SweepResult, c: f64) -> Result<WindowSet<FitResult>> {
    let mut entries = s.entries.clone();
    entries.sort_by(compare_fits);
    WindowSet::filter(entries, c)
}

/// Which model anchors component merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferencePolicy {
    /// Minimum-BIC model; members with fewer components are dropped.
    CaseI,
    /// Fewest-components model; every member is kept.
    CaseII,
}

/// Reference member plus the members used for averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSelection {
    pub reference: usize,
    /// Indices into the window's members.
    pub subset: Vec<usize>,
    /// Weights renormalized over `subset`, aligned with it.
    pub weights: Vec<f64>,
}

pub fn select_reference<M: ModelCandidate>(w: &WindowSet<M>, policy: ReferencePolicy) -> ReferenceSelection {
    let (reference, subset): (usize, Vec<usize>) = match policy {
        ReferencePolicy::CaseI => {
            let r = w.reference_case_i;
            let g_ref = w.members[r].model.n_components();
            let subset = (0..w.len())
                .filter(|&i| w.members[i].model.n_components() >= g_ref)
                .collect();
            (r, subset)
        }
        ReferencePolicy::CaseII => (w.reference_case_ii, (0..w.len()).collect()),
    };
    let weights = renormalize(w, &subset);
    ReferenceSelection {
        reference,
        subset,
        weights,
    }
}

/// Members sharing the best model's component count, for parameter
/// averaging.
pub fn equal_components_subset<M: ModelCandidate>(w: &WindowSet<M>) -> ReferenceSelection {
    let r = w.reference_case_i;
    let g_ref = w.members[r].model.n_components();
    let subset: Vec<usize> = (0..w.len())
        .filter(|&i| w.members[i].model.n_components() == g_ref)
        .collect();
    let weights = renormalize(w, &subset);
    ReferenceSelection {
        reference: r,
        subset,
        weights,
    }
}

fn renormalize<M: ModelCandidate>(w: &WindowSet<M>, subset: &[usize]) -> Vec<f64> {
    // recomputed from BICs rather than rescaled, so tiny weights keep
    // full relative precision
    let bics: Vec<f64> = subset.iter().map(|&i| w.members[i].model.bic()).collect();
    bma_weights(&bics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(structure: CovStructure, g: usize, bic: f64) -> ModelSummary {
        ModelSummary { structure, g, bic }
    }

    fn bank_note() -> WindowSet<ModelSummary> {
        WindowSet::from_members(
            vec![
                m(CovStructure::EEE, 4, 2651.92),
                m(CovStructure::VEE, 3, 2653.44),
                m(CovStructure::VEE, 4, 2659.91),
            ],
            DEFAULT_WINDOW_C,
        )
        .unwrap()
    }

    #[test]
    fn reference_table_weights() {
        let w = bma_weights(&[12103.74, 12103.81]);
        assert!((w[0] - 0.5088).abs() < 5e-4 && (w[1] - 0.4912).abs() < 5e-4);
        let w = bma_weights(&[2651.92, 2653.44, 2659.91]);
        for (a, b) in w.iter().zip([0.6736, 0.3141, 0.0124]) {
            assert!((a - b).abs() < 1e-3);
        }
        let third = bma_weights(&[5.0, 5.0, 5.0]);
        assert!(third.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn window_filtering() {
        assert!((window_threshold(20.0) - 5.991_464_547_107_98).abs() < 1e-12);
        let w = WindowSet::filter(vec![m(CovStructure::VVV, 2, 100.0), m(CovStructure::EII, 3, 110.0)], 20.0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.weights(), vec![1.0]);
        let single = WindowSet::filter(vec![m(CovStructure::VVV, 2, 7.0)], 20.0).unwrap();
        assert_eq!(single.weights(), vec![1.0]);
        assert!(WindowSet::<ModelSummary>::filter(vec![], 20.0).is_err());
        assert!(WindowSet::filter(vec![m(CovStructure::VVV, 2, 7.0)], 1.0).is_err());
    }

    #[test]
    fn bank_note_case_one() {
        let w = bank_note();
        let sel = select_reference(&w, ReferencePolicy::CaseI);
        assert_eq!(sel.reference, 0);
        assert_eq!(sel.subset, vec![0, 2]);
        assert!((sel.weights[0] - 0.9819).abs() < 1e-3);
        assert!((sel.weights[1] - 0.0181).abs() < 1e-3);
    }

    #[test]
    fn bank_note_case_two() {
        let w = bank_note();
        let sel = select_reference(&w, ReferencePolicy::CaseII);
        assert_eq!(sel.reference, 1);
        assert_eq!(sel.subset, vec![0, 1, 2]);
        for (a, b) in sel.weights.iter().zip([0.6736, 0.3141, 0.0124]) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn cases_agree_when_best_is_smallest() {
        let w = WindowSet::from_members(
            vec![
                m(CovStructure::VVV, 2, 10.0),
                m(CovStructure::EEE, 3, 11.0),
                m(CovStructure::VII, 4, 12.5),
            ],
            20.0,
        )
        .unwrap();
        assert_eq!(
            select_reference(&w, ReferencePolicy::CaseI),
            select_reference(&w, ReferencePolicy::CaseII)
        );
    }

    #[test]
    fn case_two_tie_prefers_smaller_bic() {
        let w = WindowSet::from_members(
            vec![
                m(CovStructure::VVV, 3, 10.0),
                m(CovStructure::EEE, 2, 12.0),
                m(CovStructure::EII, 2, 11.0),
            ],
            20.0,
        )
        .unwrap();
        assert_eq!(w.reference_case_ii, 2);
    }

    proptest! {
        #[test]
        fn shift_invariant(bics in proptest::collection::vec(-1e4f64..1e4, 1..12), shift in -1e4f64..1e4) {
            let a = bma_weights(&bics);
            let shifted: Vec<f64> = bics.iter().map(|b| b + shift).collect();
            let b = bma_weights(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn window_monotone(bics in proptest::collection::vec(0f64..30.0, 1..12), c1 in 1.01f64..50.0, extra in 0f64..50.0) {
            let models: Vec<ModelSummary> = bics.iter().enumerate().map(|(i, &b)| m(CovStructure::VVV, i + 1, b)).collect();
            let small = WindowSet::filter(models.clone(), c1).unwrap().summaries();
            let large = WindowSet::filter(models, c1 + extra).unwrap().summaries();
            for s in &small {
                prop_assert!(large.contains(s));
            }
        }

        #[test]
        fn case_one_weights_sum_to_one(bics in proptest::collection::vec(0f64..6.0, 1..10), gs in proptest::collection::vec(1usize..6, 10)) {
            let models: Vec<ModelSummary> = bics.iter().zip(&gs).map(|(&b, &g)| m(CovStructure::EEE, g, b)).collect();
            let w = WindowSet::filter(models, 20.0).unwrap();
            let sel = select_reference(&w, ReferencePolicy::CaseI);
            prop_assert!((sel.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.weights().iter().all(|&x| x > 0.0));
        }
    }
}
