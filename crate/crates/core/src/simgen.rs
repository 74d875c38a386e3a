//! Synthetic labeled data: Gaussian clusters, uniform-in-triangle
//! clusters, and optional uniform noise columns.
//!
//! Every draw comes from one seeded ChaCha8 stream, so a (spec, seed) pair
//! reproduces the same dataset on every platform.

use std::fs::File;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Name of the label column in emitted CSV files.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCluster {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Row-major `p × p` covariance.
    pub cov: Vec<Vec<f64>>,
}

impl GaussianCluster {
    /// Cluster with identity covariance.
    pub fn spherical(n: usize, mean: Vec<f64>, variance: f64) -> Self {
        let p = mean.len();
        let cov = (0..p)
            .map(|i| (0..p).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        Self { n, mean, cov }
    }
}

/// Points drawn uniformly from the interior of a planar triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleCluster {
    pub n: usize,
    pub vertices: [[f64; 2]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterSpec {
    Gaussian(GaussianCluster),
    Triangle(TriangleCluster),
}

impl ClusterSpec {
    pub fn n(&self) -> usize {
        match self {
            ClusterSpec::Gaussian(c) => c.n,
            ClusterSpec::Triangle(c) => c.n,
        }
    }

    fn dim(&self) -> usize {
        match self {
            ClusterSpec::Gaussian(c) => c.mean.len(),
            ClusterSpec::Triangle(_) => 2,
        }
    }
}

/// Extra columns of independent `Uniform(low, high)` noise appended after
/// the informative columns. This is a stand-in for a "noise variable",
/// not a separation-index construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformNoise {
    pub columns: usize,
    pub low: f64,
    pub high: f64,
}

/// Full description of a synthetic dataset. Cluster `k` (in list order)
/// receives label `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub clusters: Vec<ClusterSpec>,
    pub noise: Option<UniformNoise>,
}

impl ScenarioSpec {
    pub fn n(&self) -> usize {
        self.clusters.iter().map(ClusterSpec::n).sum()
    }

    /// Checks sizes, shapes, covariance definiteness and triangle area.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .clusters
            .first()
            .ok_or_else(|| Error::InvalidArgument("scenario has no clusters".into()))?;
        let p = first.dim();
        if p == 0 {
            return Err(Error::NoColumns);
        }
        for (k, c) in self.clusters.iter().enumerate() {
            if c.n() == 0 {
                return Err(Error::InvalidArgument(format!("cluster {} has no points", k + 1)));
            }
            if c.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.dim(),
                });
            }
            match c {
                ClusterSpec::Gaussian(g) => {
                    cholesky_of(g)?;
                }
                ClusterSpec::Triangle(t) => {
                    if !(triangle_area(&t.vertices) > 0.0) {
                        return Err(Error::InvalidArgument(format!("triangle of cluster {} is degenerate", k + 1)));
                    }
                }
            }
        }
        if let Some(noise) = &self.noise {
            if noise.columns == 0 || !(noise.low < noise.high) {
                return Err(Error::InvalidArgument("noise needs ≥1 column and low < high".into()));
            }
        }
        Ok(())
    }
}

fn cholesky_of(g: &GaussianCluster) -> Result<DMatrix<f64>> {
    let p = g.mean.len();
    if g.cov.len() != p || g.cov.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: g.cov.len(),
        });
    }
    let m = DMatrix::from_fn(p, p, |i, j| g.cov[i][j]);
    if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    m.cholesky().map(|c| c.l()).ok_or(Error::NotPositiveDefinite)
}

pub fn triangle_area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs()
}

/// Barycentric point-in-triangle test (boundary counts as inside).
pub fn in_triangle(v: &[[f64; 2]; 3], x: [f64; 2]) -> bool {
    let det = (v[1][1] - v[2][1]) * (v[0][0] - v[2][0]) + (v[2][0] - v[1][0]) * (v[0][1] - v[2][1]);
    let a = ((v[1][1] - v[2][1]) * (x[0] - v[2][0]) + (v[2][0] - v[1][0]) * (x[1] - v[2][1])) / det;
    let b = ((v[2][1] - v[0][1]) * (x[0] - v[2][0]) + (v[0][0] - v[2][0]) * (x[1] - v[2][1])) / det;
    let c = 1.0 - a - b;
    a >= 0.0 && b >= 0.0 && c >= 0.0
}

/// Uniform sampler over a triangle by rejection from its bounding box.
#[derive(Debug, Clone)]
pub struct TriangleSampler {
    vertices: [[f64; 2]; 3],
    lo: [f64; 2],
    hi: [f64; 2],
    pub attempts: u64,
    pub accepted: u64,
}

impl TriangleSampler {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let axis = |d: usize, f: fn(f64, f64) -> f64| vertices.iter().map(|v| v[d]).reduce(f).expect("three vertices");
        Self {
            vertices,
            lo: [axis(0, f64::min), axis(1, f64::min)],
            hi: [axis(0, f64::max), axis(1, f64::max)],
            attempts: 0,
            accepted: 0,
        }
    }

    /// Fraction of the bounding box covered by the triangle, the expected
    /// acceptance rate.
    pub fn area_ratio(&self) -> f64 {
        triangle_area(&self.vertices) / ((self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1]))
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts as f64
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; 2] {
        loop {
            self.attempts += 1;
            let x = [
                rng.random_range(self.lo[0]..=self.hi[0]),
                rng.random_range(self.lo[1]..=self.hi[1]),
            ];
            if in_triangle(&self.vertices, x) {
                self.accepted += 1;
                return x;
            }
        }
    }
}

/// Rejection statistics for one triangle cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleAcceptance {
    pub label: String,
    pub attempts: u64,
    pub accepted: u64,
    pub area_ratio: f64,
}

/// Everything needed to regenerate a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMetadata {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub generator: String,
    pub label_column: String,
    pub triangle_acceptance: Vec<TriangleAcceptance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    pub metadata: SimulationMetadata,
}

/// Draws a dataset from `spec`. Clusters are generated in order, so the
/// rows of cluster 1 come first.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.clusters[0].dim();
    let extra = spec.noise.as_ref().map_or(0, |nz| nz.columns);
    let n = spec.n();
    let mut values = DMatrix::zeros(n, p + extra);
    let mut labels = Vec::with_capacity(n);
    let mut acceptance = Vec::new();
    let mut row = 0;
    for (k, cluster) in spec.clusters.iter().enumerate() {
        let label = (k + 1).to_string();
        match cluster {
            ClusterSpec::Gaussian(g) => {
                let l = cholesky_of(g)?;
                let mean = DVector::from_column_slice(&g.mean);
                for _ in 0..g.n {
                    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let x = &mean + &l * z;
                    values.view_mut((row, 0), (1, p)).copy_from(&x.transpose());
                    labels.push(label.clone());
                    row += 1;
                }
            }
            ClusterSpec::Triangle(t) => {
                let mut sampler = TriangleSampler::new(t.vertices);
                for _ in 0..t.n {
                    let x = sampler.sample(&mut rng);
                    values[(row, 0)] = x[0];
                    values[(row, 1)] = x[1];
                    labels.push(label.clone());
                    row += 1;
                }
                acceptance.push(TriangleAcceptance {
                    label: label.clone(),
                    attempts: sampler.attempts,
                    accepted: sampler.accepted,
                    area_ratio: sampler.area_ratio(),
                });
            }
        }
    }
    if let Some(noise) = &spec.noise {
        for i in 0..n {
            for j in p..p + extra {
                values[(i, j)] = rng.random_range(noise.low..noise.high);
            }
        }
    }
    let mut names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    names.extend((1..=extra).map(|j| format!("noise{j}")));
    let dataset = Dataset::new(values, names, Some(labels))?;
    Ok(Simulation {
        dataset,
        metadata: SimulationMetadata {
            spec: spec.clone(),
            seed,
            generator: "ChaCha8".into(),
            label_column: LABEL_COLUMN.into(),
            triangle_acceptance: acceptance,
        },
    })
}

/// Draws Gaussian clusters only.
pub fn gen_gaussian_clusters(clusters: &[GaussianCluster], seed: u64) -> Result<Simulation> {
    let spec = ScenarioSpec {
        name: "gaussian".into(),
        clusters: clusters.iter().cloned().map(ClusterSpec::Gaussian).collect(),
        noise: None,
    };
    generate(&spec, seed)
}

/// `k` spherical clusters of `n_per` points in `p` dimensions, with means
/// spaced `separation` standard deviations apart along the first axis.
pub fn separated_clusters_spec(k: usize, p: usize, n_per: usize, separation: f64) -> ScenarioSpec {
    let clusters = (0..k)
        .map(|c| {
            let mut mean = vec![0.0; p];
            if p > 0 {
                mean[0] = separation * c as f64;
            }
            ClusterSpec::Gaussian(GaussianCluster::spherical(n_per, mean, 1.0))
        })
        .collect();
    ScenarioSpec {
        name: format!("separated-{k}x{p}"),
        clusters,
        noise: None,
    }
}

/// Gaussian clusters plus one uniform noise column spanning the data's
/// informative range. An analogue of a noisy-variable scenario, not a
/// reproduction of any particular generator.
pub fn with_noise_column(mut spec: ScenarioSpec, low: f64, high: f64) -> ScenarioSpec {
    spec.noise = Some(UniformNoise { columns: 1, low, high });
    spec.name = format!("{}+noise", spec.name);
    spec
}

/// Two right triangles flanking two unit-variance Gaussians in the plane.
///
/// Labels: 1 and 2 are the triangles (100 points each), 3 and 4 the
/// Gaussians (150 points each).
pub fn scenario3_spec() -> ScenarioSpec {
    ScenarioSpec {
        name: "scenario3".into(),
        clusters: vec![
            ClusterSpec::Triangle(TriangleCluster {
                n: 100,
                vertices: [[-9.0, -5.0], [-4.0, -5.0], [-9.0, 5.0]],
            }),
            ClusterSpec::Triangle(TriangleCluster {
                n: 100,
                vertices: [[9.0, 5.0], [4.0, 5.0], [9.0, -5.0]],
            }),
            ClusterSpec::Gaussian(GaussianCluster::spherical(150, vec![0.0, -3.0], 1.0)),
            ClusterSpec::Gaussian(GaussianCluster::spherical(150, vec![0.0, 3.0], 1.0)),
        ],
        noise: None,
    }
}

pub fn gen_scenario3(seed: u64) -> Simulation {
    generate(&scenario3_spec(), seed).expect("built-in scenario is valid")
}

/// Sidecar path for a CSV: `data.csv` → `data.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

impl Simulation {
    /// Writes the CSV (labels in [`LABEL_COLUMN`]) and its JSON sidecar.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<PathBuf> {
        let csv_path = csv_path.as_ref();
        self.dataset.save_csv(csv_path, LABEL_COLUMN)?;
        let meta = metadata_path(csv_path);
        let file = File::create(&meta).map_err(|source| Error::Io {
            path: meta.clone(),
            source,
        })?;
        serde_json::to_writer_pretty(file, &self.metadata)?;
        Ok(meta)
    }
}
