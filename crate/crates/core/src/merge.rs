//! Merging mixture components onto a smaller reference clustering.
//!
//! A `G`-component model is merged onto `H < G` clusters by choosing the
//! surjection `1..G → 1..H` whose merged MAP partition has the largest
//! adjusted Rand index against the reference partition. Candidates are
//! enumerated as an ordered choice of `H` anchor components (anchor `k`
//! goes to target `k`) crossed with every assignment of the remaining
//! `G - H` components, which reaches every surjection at least once.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ari::{adjusted_rand_index, choose2, contingency, PairSums};
use crate::data::Partition;
use crate::error::{Error, Result};
use crate::gpcm::{MixtureParams, SoftAssignment};

/// Candidate-count ceiling for [`best_merge`].
pub const MAX_CANDIDATES: u128 = 100_000_000;
/// Largest `G` the brute-force oracle accepts.
pub const ORACLE_MAX_G: usize = 8;

/// Surjective assignment of `G` source components onto `H` targets
/// (zero-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeMap {
    assignment: Vec<usize>,
    h: usize,
}

impl MergeMap {
    pub fn new(assignment: Vec<usize>, h: usize) -> Result<Self> {
        let g = assignment.len();
        if h == 0 || h > g {
            return Err(Error::MergeTargetTooLarge { g, h });
        }
        let mut hit = vec![false; h];
        for &t in &assignment {
            if t >= h {
                return Err(Error::InvalidArgument(format!("merge target {t} out of range for H = {h}")));
            }
            hit[t] = true;
        }
        if !hit.iter().all(|&x| x) {
            return Err(Error::InvalidArgument("merge map is not surjective".into()));
        }
        Ok(Self { assignment, h })
    }

    pub fn identity(g: usize) -> Self {
        Self {
            assignment: (0..g).collect(),
            h: g,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn g(&self) -> usize {
        self.assignment.len()
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Source components grouped by target.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.h];
        for (g, &t) in self.assignment.iter().enumerate() {
            groups[t].push(g);
        }
        groups
    }
}

/// Relabels a `G`-cluster partition through a merge map.
pub fn apply_merge_to_partition(p: &Partition, m: &MergeMap) -> Result<Partition> {
    if p.k() != m.g() {
        return Err(Error::ClusterCountMismatch {
            expected: m.g(),
            found: p.k(),
        });
    }
    let merged = p.assignments().iter().map(|&a| m.assignment[a]).collect();
    Partition::new(merged, m.h)
}

/// Sums membership columns that map to the same target.
pub fn apply_merge_to_z(z: &SoftAssignment, m: &MergeMap) -> Result<SoftAssignment> {
    if z.g() != m.g() {
        return Err(Error::ClusterCountMismatch {
            expected: m.g(),
            found: z.g(),
        });
    }
    let src = z.matrix();
    let mut out = DMatrix::zeros(z.n(), m.h);
    for (g, &t) in m.assignment.iter().enumerate() {
        let mut col = out.column_mut(t);
        col += src.column(g);
    }
    Ok(SoftAssignment::from_matrix_unchecked(out))
}

/// Number of candidates `C(G,H) · H^(G-H)` the enumeration visits.
pub fn candidate_count(g: usize, h: usize) -> u128 {
    if h == 0 || h > g {
        return 0;
    }
    binomial(g, h).saturating_mul((h as u128).saturating_pow((g - h) as u32))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic `h`-subsets of `0..g`.
fn combinations(g: usize, h: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..h).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..h).rev().find(|&i| cur[i] < g - h + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..h {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Calls `f` with every map for one anchor combination, in order of the
/// remainder assignment read as a base-`h` number (first remaining
/// component most significant).
fn for_each_remainder(g: usize, h: usize, anchors: &[usize], mut f: impl FnMut(&[usize])) {
    let mut assignment = vec![0usize; g];
    let mut rest = Vec::with_capacity(g - h);
    let mut a = 0;
    for c in 0..g {
        if a < anchors.len() && anchors[a] == c {
            assignment[c] = a;
            a += 1;
        } else {
            rest.push(c);
        }
    }
    let mut digits = vec![0usize; rest.len()];
    loop {
        for (&c, &d) in rest.iter().zip(&digits) {
            assignment[c] = d;
        }
        f(&assignment);
        let Some(pos) = (0..digits.len()).rev().find(|&i| digits[i] + 1 < h) else {
            return;
        };
        digits[pos] += 1;
        for d in digits.iter_mut().skip(pos + 1) {
            *d = 0;
        }
    }
}

/// Every candidate merge of `g` components onto `h` targets, in
/// enumeration order.
pub fn enumerate_candidates(g: usize, h: usize) -> Result<impl Iterator<Item = MergeMap>> {
    if h == 0 || h > g {
        return Err(Error::MergeTargetTooLarge { g, h });
    }
    let maps = combinations(g, h).into_iter().flat_map(move |anchors| {
        let mut batch = Vec::new();
        for_each_remainder(g, h, &anchors, |a| {
            batch.push(MergeMap {
                assignment: a.to_vec(),
                h,
            })
        });
        batch
    });
    Ok(maps)
}

/// Winner of a merge search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeChoice {
    pub map: MergeMap,
    pub ari: f64,
    /// Position of the winner in enumeration order.
    pub index: u128,
}

/// Finds the merge of `candidate` (k = G) maximizing the ARI against
/// `reference` (k = H). Ties go to the earliest candidate.
pub fn best_merge(candidate: &Partition, reference: &Partition) -> Result<MergeChoice> {
    let g = candidate.k();
    let h = reference.k();
    if candidate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: candidate.len(),
            right: reference.len(),
        });
    }
    if h > g {
        return Err(Error::MergeTargetTooLarge { g, h });
    }
    let count = candidate_count(g, h);
    if count > MAX_CANDIDATES {
        return Err(Error::MergeSearchTooLarge {
            count,
            limit: MAX_CANDIDATES,
        });
    }

    let table = contingency(candidate, reference)?;
    let counts = table.counts().to_vec();
    let cols: i128 = table.col_sums().iter().map(|&c| choose2(c)).sum();
    let all = choose2(table.total());
    let per_combo = (h as u128).pow((g - h) as u32);

    let best = combinations(g, h)
        .into_par_iter()
        .enumerate()
        .map(|(ci, anchors)| {
            let mut merged = vec![vec![0u64; h]; h];
            let mut best: Option<(f64, u128, Vec<usize>)> = None;
            let mut ri: u128 = 0;
            for_each_remainder(g, h, &anchors, |a| {
                merged.iter_mut().for_each(|r| r.fill(0));
                for (src, &t) in a.iter().enumerate() {
                    for (m, c) in merged[t].iter_mut().zip(&counts[src]) {
                        *m += c;
                    }
                }
                let sums = PairSums {
                    index: merged.iter().flatten().map(|&c| choose2(c)).sum(),
                    rows: merged.iter().map(|r| choose2(r.iter().sum())).sum(),
                    cols,
                    all,
                };
                let ari = sums.ari();
                if best.as_ref().is_none_or(|b| ari > b.0) {
                    best = Some((ari, ci as u128 * per_combo + ri, a.to_vec()));
                }
                ri += 1;
            });
            best.expect("every combination has at least one remainder assignment")
        })
        .reduce_with(|x, y| {
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                y
            } else {
                x
            }
        })
        .expect("at least one anchor combination");

    Ok(MergeChoice {
        map: MergeMap {
            assignment: best.2,
            h,
        },
        ari: best.0,
        index: best.1,
    })
}

/// Exhaustive maximum ARI over all surjections `G → H`, evaluated through
/// full partitions. Test oracle for [`best_merge`].
pub fn brute_force_merge_oracle(candidate: &Partition, reference: &Partition) -> Result<f64> {
    let g = candidate.k();
    let h = reference.k();
    if g > ORACLE_MAX_G {
        return Err(Error::OracleTooLarge(g));
    }
    if h > g {
        return Err(Error::MergeTargetTooLarge { g, h });
    }
    let mut best = f64::NEG_INFINITY;
    let total = h.pow(g as u32);
    for code in 0..total {
        let mut c = code;
        let assignment: Vec<usize> = (0..g)
            .map(|_| {
                let t = c % h;
                c /= h;
                t
            })
            .collect();
        let Ok(map) = MergeMap::new(assignment, h) else {
            continue;
        };
        let merged = apply_merge_to_partition(candidate, &map)?;
        best = best.max(adjusted_rand_index(reference, &merged)?);
    }
    Ok(best)
}

/// A mixture regrouped into `H` clusters: `f(x) = Σ_j π*_j f*_j(x)`, where
/// each `f*_j` is the renormalized sub-mixture of the source components
/// in group `j`.
#[derive(Debug, Clone)]
pub struct MergedModel {
    pub groups: Vec<Vec<usize>>,
    pub pi_star: Vec<f64>,
    pub source: MixtureParams,
}

impl MergedModel {
    pub fn new(source: MixtureParams, map: &MergeMap) -> Result<Self> {
        if map.g() != source.g() {
            return Err(Error::ClusterCountMismatch {
                expected: source.g(),
                found: map.g(),
            });
        }
        let groups = map.groups();
        let pi_star = groups.iter().map(|grp| grp.iter().map(|&g| source.pi[g]).sum()).collect();
        Ok(Self {
            groups,
            pi_star,
            source,
        })
    }

    /// Density of merged cluster `j`.
    pub fn cluster_density(&self, j: usize, x: &DVector<f64>) -> Result<f64> {
        let mut total = 0.0;
        for &g in &self.groups[j] {
            let w = self.source.pi[g] / self.pi_star[j];
            total += w * crate::gpcm::component_density(x, &self.source.means[g], &self.source.covariances[g])?;
        }
        Ok(total)
    }

    /// `Σ_j π*_j f*_j(x)`; equals the source mixture density.
    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..self.groups.len() {
            total += self.pi_star[j] * self.cluster_density(j, x)?;
        }
        Ok(total)
    }

    /// π-weighted mean of the component means in each group.
    pub fn group_means(&self) -> Vec<DVector<f64>> {
        self.groups
            .iter()
            .zip(&self.pi_star)
            .map(|(grp, &ps)| {
                grp.iter()
                    .fold(DVector::zeros(self.source.p()), |acc, &g| acc + &self.source.means[g] * self.source.pi[g])
                    / ps
            })
            .collect()
    }
}
