//! Combining the models of a window into one clustering.
//!
//! Two routes are provided. [`average_posteriors`] averages membership
//! probabilities, merging the components of larger models onto the
//! reference model first. [`average_models`] averages the aligned
//! parameters of the models that share the best model's `G` and
//! reclassifies from the averaged mixture.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::gpcm::{e_step, CovStructure, FitResult, MixtureParams, SoftAssignment};
use crate::merge::{apply_merge_to_z, best_merge, MergeChoice, MergedModel};
use crate::occam::{equal_components_subset, select_reference, ReferencePolicy, ReferenceSelection, WindowSet};

/// Bijection aligning another model's components to a reference:
/// reference component `g` corresponds to other component `permutation[g]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentMatching {
    pub permutation: Vec<usize>,
}

impl ComponentMatching {
    pub fn identity(g: usize) -> Self {
        Self {
            permutation: (0..g).collect(),
        }
    }
}

/// MAP classification; ties go to the lowest component index.
pub fn harden(z: &SoftAssignment) -> Partition {
    let m = z.matrix();
    let labels = m
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (g, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = g;
                }
            }
            best
        })
        .collect();
    Partition::new(labels, z.g()).expect("argmax lies in 0..G")
}

/// Minimum-cost perfect assignment (Hungarian algorithm) on a square
/// cost matrix. Returns `col_for_row`.
pub fn solve_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // potentials and matching use 1-based indices with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_for_row = vec![0; n];
    for j in 1..=n {
        col_for_row[row_of_col[j] - 1] = j - 1;
    }
    col_for_row
}

/// Aligns `other` means to `reference` means by minimum total squared
/// distance.
pub fn match_means(reference: &[DVector<f64>], other: &[DVector<f64>]) -> Result<ComponentMatching> {
    if reference.len() != other.len() {
        return Err(Error::ClusterCountMismatch {
            expected: reference.len(),
            found: other.len(),
        });
    }
    if let (Some(a), Some(b)) = (reference.first(), other.first()) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
    }
    let g = reference.len();
    let cost = DMatrix::from_fn(g, g, |r, c| (&reference[r] - &other[c]).norm_squared());
    Ok(ComponentMatching {
        permutation: solve_assignment(&cost),
    })
}

/// Aligns the components of `other` to those of `reference` by their means.
pub fn match_components(reference: &MixtureParams, other: &MixtureParams) -> Result<ComponentMatching> {
    match_means(&reference.means, &other.means)
}

/// How one window member was brought onto the reference's components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberAlignment {
    /// Index into the window's members.
    pub member: usize,
    pub weight: f64,
    /// Present when the member had more components than the reference.
    pub merge: Option<MergeChoice>,
    pub matching: ComponentMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorAverage {
    pub policy: ReferencePolicy,
    pub selection: ReferenceSelection,
    pub members: Vec<MemberAlignment>,
    pub z: SoftAssignment,
}

impl PosteriorAverage {
    pub fn partition(&self) -> Partition {
        harden(&self.z)
    }
}

/// Membership probabilities of every window member on `data`.
pub fn member_posteriors(window: &WindowSet<FitResult>, data: &Dataset) -> Result<Vec<SoftAssignment>> {
    window.members.iter().map(|m| e_step(&m.model.params, data)).collect()
}

/// Weighted average of (merged, aligned) membership probabilities.
///
/// `fits_z[i]` holds the memberships of window member `i`.
pub fn average_posteriors(
    window: &WindowSet<FitResult>,
    policy: ReferencePolicy,
    fits_z: &[SoftAssignment],
) -> Result<PosteriorAverage> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if fits_z.len() != window.len() {
        return Err(Error::LengthMismatch {
            left: fits_z.len(),
            right: window.len(),
        });
    }
    let selection = select_reference(window, policy);
    let reference = &window.members[selection.reference].model;
    let g_ref = reference.g();
    let ref_z = &fits_z[selection.reference];
    let ref_partition = harden(ref_z);
    let n = ref_z.n();

    let mut total = DMatrix::zeros(n, g_ref);
    let mut members = Vec::with_capacity(selection.subset.len());
    for (&i, &weight) in selection.subset.iter().zip(&selection.weights) {
        let fit = &window.members[i].model;
        let z = &fits_z[i];
        if z.n() != n {
            return Err(Error::LengthMismatch { left: z.n(), right: n });
        }
        let (aligned, merge, matching) = if i == selection.reference {
            (z.clone(), None, ComponentMatching::identity(g_ref))
        } else if fit.g() == g_ref {
            let matching = match_components(&reference.params, &fit.params)?;
            (z.permute_columns(&matching.permutation), None, matching)
        } else {
            let choice = best_merge(&harden(z), &ref_partition)?;
            let merged_z = apply_merge_to_z(z, &choice.map)?;
            let group_means = MergedModel::new(fit.params.clone(), &choice.map)?.group_means();
            let matching = match_means(&reference.params.means, &group_means)?;
            (merged_z.permute_columns(&matching.permutation), Some(choice), matching)
        };
        total += aligned.matrix() * weight;
        members.push(MemberAlignment {
            member: i,
            weight,
            merge,
            matching,
        });
    }
    Ok(PosteriorAverage {
        policy,
        selection,
        members,
        z: SoftAssignment::from_matrix_unchecked(total),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAverage {
    pub selection: ReferenceSelection,
    pub matchings: Vec<ComponentMatching>,
    /// Averaged mixture, labeled with the unconstrained structure.
    pub params: MixtureParams,
    pub z: SoftAssignment,
}

impl ModelAverage {
    pub fn partition(&self) -> Partition {
        harden(&self.z)
    }
}

/// Weighted average of aligned parameters over the members that share the
/// best model's component count.
pub fn average_models(window: &WindowSet<FitResult>, data: &Dataset) -> Result<ModelAverage> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let selection = equal_components_subset(window);
    let best = &window.members[selection.reference].model.params;
    let g = best.g();
    let p = best.p();

    let mut pi = vec![0.0; g];
    let mut means = vec![DVector::zeros(p); g];
    let mut covs = vec![DMatrix::zeros(p, p); g];
    let mut matchings = Vec::with_capacity(selection.subset.len());
    for (&i, &w) in selection.subset.iter().zip(&selection.weights) {
        let params = &window.members[i].model.params;
        let matching = if i == selection.reference {
            ComponentMatching::identity(g)
        } else {
            match_components(best, params)?
        };
        for (k, &src) in matching.permutation.iter().enumerate() {
            pi[k] += w * params.pi[src];
            means[k] += &params.means[src] * w;
            covs[k] += &params.covariances[src] * w;
        }
        matchings.push(matching);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    let params = MixtureParams::new(CovStructure::VVV, pi, means, covs)?;
    let z = e_step(&params, data)?;
    Ok(ModelAverage {
        selection,
        matchings,
        params,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn harden_rules() {
        let z = SoftAssignment::new(DMatrix::from_row_slice(3, 2, &[0.7, 0.3, 0.5, 0.5, 0.1, 0.9])).unwrap();
        assert_eq!(harden(&z).assignments(), &[0, 0, 1]);
        let swapped = z.permute_columns(&[1, 0]);
        let relabeled: Vec<usize> = harden(&z).assignments().iter().map(|&a| 1 - a).collect();
        // ties move with the column order, so compare only untied rows
        assert_eq!(harden(&swapped).assignments()[0], relabeled[0]);
        assert_eq!(harden(&swapped).assignments()[2], relabeled[2]);
    }

    #[test]
    fn matching_identity_and_swap() {
        let a = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![5.0, 5.0]), DVector::from_vec(vec![-3.0, 2.0])];
        assert_eq!(match_means(&a, &a).unwrap(), ComponentMatching::identity(3));
        let b = vec![a[1].clone(), a[0].clone(), a[2].clone()];
        assert_eq!(match_means(&a, &b).unwrap().permutation, vec![1, 0, 2]);
        assert!(match_means(&a, &b[..2]).is_err());
    }

    #[test]
    fn matching_agrees_with_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let perms = permutations(4);
        assert_eq!(perms.len(), 24);
        for _ in 0..200 {
            let draw = |rng: &mut ChaCha8Rng| -> Vec<DVector<f64>> {
                (0..4)
                    .map(|_| DVector::from_vec(vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]))
                    .collect()
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let cost = |p: &[usize]| -> f64 { (0..4).map(|g| (&a[g] - &b[p[g]]).norm_squared()).sum() };
            let best = perms.iter().map(|p| cost(p)).fold(f64::INFINITY, f64::min);
            let got = match_means(&a, &b).unwrap();
            assert!((cost(&got.permutation) - best).abs() < 1e-9);
        }
    }
}
