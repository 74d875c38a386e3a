//! Contingency tables, the Rand index and the adjusted Rand index.
//!
//! Pair counts use exact 128-bit integer arithmetic; only the final ratio
//! is taken in floating point.

use crate::data::Partition;
use crate::error::{Error, Result};

/// Co-occurrence counts `n_ij` between two partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Builds a table from raw counts (rows index the first partition).
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let cols = counts.first().map_or(0, Vec::len);
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let total = row_sums.iter().sum();
        Self {
            counts,
            row_sums,
            col_sums,
            total,
        }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn pair_sums(&self) -> PairSums {
        PairSums {
            index: self.counts.iter().flatten().map(|&c| choose2(c)).sum(),
            rows: self.row_sums.iter().map(|&c| choose2(c)).sum(),
            cols: self.col_sums.iter().map(|&c| choose2(c)).sum(),
            all: choose2(self.total),
        }
    }

    /// Adjusted Rand index computed from the table alone.
    pub fn ari(&self) -> f64 {
        self.pair_sums().ari()
    }
}

/// Pair counts behind the Rand-family indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairSums {
    pub index: i128,
    pub rows: i128,
    pub cols: i128,
    pub all: i128,
}

impl PairSums {
    pub(crate) fn ari(&self) -> f64 {
        let ab = self.rows * self.cols;
        // 2 (index - expected) and 2 (max - expected), both scaled by C(n,2)
        let num = 2 * (self.index * self.all - ab);
        let den = (self.rows + self.cols) * self.all - 2 * ab;
        if den == 0 {
            // both partitions are all-singletons or both are one cluster
            return if num == 0 { 1.0 } else { 0.0 };
        }
        num as f64 / den as f64
    }
}

pub(crate) fn choose2(c: u64) -> i128 {
    let c = c as i128;
    c * (c - 1) / 2
}

fn check_lengths(a: &Partition, b: &Partition) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// `n_ij = #{t : a(t) = i, b(t) = j}`.
pub fn contingency(a: &Partition, b: &Partition) -> Result<ContingencyTable> {
    check_lengths(a, b)?;
    let mut counts = vec![vec![0u64; b.k()]; a.k()];
    for (&i, &j) in a.assignments().iter().zip(b.assignments()) {
        counts[i][j] += 1;
    }
    Ok(ContingencyTable::from_counts(counts))
}

/// Fraction of observation pairs on which the partitions agree.
pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    if a.len() < 2 {
        return Err(Error::TooFewPairs(a.len()));
    }
    let s = contingency(a, b)?.pair_sums();
    let agreements = s.all + 2 * s.index - s.rows - s.cols;
    Ok(agreements as f64 / s.all as f64)
}

/// Hubert–Arabie adjusted Rand index.
///
/// When the chance-corrected denominator vanishes (both partitions are
/// all-singletons, or both put everything in one cluster) the result is 1
/// if the partitions are equivalent and 0 otherwise.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    if a.len() < 2 {
        return Err(Error::TooFewPairs(a.len()));
    }
    Ok(contingency(a, b)?.ari())
}
