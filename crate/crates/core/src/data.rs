//! Tabular input: loading, validation, standardization and label handling.
//!
//! Files are comma-separated UTF-8 with a header row and `.` as decimal
//! point. Every non-label column must parse as a finite number.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × p` numeric data matrix with optional class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: DMatrix<f64>,
    feature_names: Vec<String>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, checking shape, finiteness and label length.
    pub fn new(
        values: DMatrix<f64>,
        feature_names: Vec<String>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::NoRows);
        }
        if values.ncols() == 0 {
            return Err(Error::NoColumns);
        }
        if feature_names.len() != values.ncols() {
            return Err(Error::LengthMismatch {
                left: feature_names.len(),
                right: values.ncols(),
            });
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                // column-major storage
                let row = idx % values.nrows();
                let col = idx / values.nrows();
                return Err(Error::NonNumericCell {
                    row: row + 1,
                    column: feature_names[col].clone(),
                    value: v.to_string(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: values.nrows(),
                });
            }
        }
        Ok(Self {
            values,
            feature_names,
            labels,
        })
    }

    /// Builds an unlabeled dataset from row vectors, naming columns `x1..xp`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NoRows);
        }
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    found: r.len(),
                    expected: p,
                });
            }
        }
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(values, names, None)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: self.n(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Reads a dataset from a CSV file.
    pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, label_column)
    }

    /// Reads a dataset from any CSV source.
    pub fn read_csv<R: Read>(reader: R, label_column: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let label_idx = match label_column {
            Some(name) => Some(
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::LabelColumnNotFound(name.to_owned()))?,
            ),
            None => None,
        };
        let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| Some(j) != label_idx).collect();
        if feature_cols.is_empty() {
            return Err(Error::NoColumns);
        }

        let mut flat = Vec::new();
        let mut labels = label_idx.map(|_| Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != header.len() {
                return Err(Error::RaggedRow {
                    row,
                    found: record.len(),
                    expected: header.len(),
                });
            }
            for &j in &feature_cols {
                let cell = &record[j];
                let value = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumericCell {
                        row,
                        column: header[j].clone(),
                        value: cell.to_owned(),
                    })?;
                flat.push(value);
            }
            if let (Some(idx), Some(l)) = (label_idx, labels.as_mut()) {
                l.push(record[idx].to_owned());
            }
        }
        let p = feature_cols.len();
        let n = flat.len() / p;
        if n == 0 {
            return Err(Error::NoRows);
        }
        let values = DMatrix::from_row_slice(n, p, &flat);
        let names = feature_cols.iter().map(|&j| header[j].clone()).collect();
        Self::new(values, names, labels)
    }

    /// Writes the dataset as CSV; labels, when present, go to a final
    /// column named `label_column`. Values use the shortest representation
    /// that parses back to the identical `f64`.
    pub fn write_csv<W: Write>(&self, writer: W, label_column: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        if self.labels.is_some() {
            header.push(label_column);
        }
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.values.row(i).iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].clone());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file, label_column)
    }

    /// Centers each column and scales it to unit sample standard deviation.
    pub fn standardize(&self) -> Result<Self> {
        let n = self.n();
        let mut values = self.values.clone();
        for j in 0..self.p() {
            let mut col = values.column_mut(j);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(Error::ConstantColumn(self.feature_names[j].clone()));
            }
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
        Ok(Self {
            values,
            feature_names: self.feature_names.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Maps the label column onto a partition.
    pub fn partition_from_labels(&self) -> Result<Partition> {
        let labels = self.labels.as_ref().ok_or(Error::MissingLabels)?;
        Ok(Partition::from_labels(labels))
    }
}

/// A hard clustering of `n` observations into `k` clusters.
///
/// Cluster indices are zero-based in memory; files and reports use `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignments: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("partition needs k >= 1".into()));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::InvalidArgument(format!(
                "cluster index {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { assignments, k })
    }

    /// Relabels arbitrary labels to `0..k` in order of first appearance.
    pub fn from_labels<T: AsRef<str>>(labels: &[T]) -> Self {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let assignments = labels
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l.as_ref()).or_insert(next)
            })
            .collect();
        Self {
            assignments,
            k: seen.len().max(1),
        }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Assignments shifted to `1..=k`.
    pub fn one_based(&self) -> Vec<usize> {
        self.assignments.iter().map(|a| a + 1).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}
