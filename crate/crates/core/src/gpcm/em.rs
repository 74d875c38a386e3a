use serde::{Deserialize, Serialize};

use super::init::kmeans_partition;
use super::mstep::{m_step, m_step_exact};
use super::params::{e_step_with_loglik, MixtureParams, SoftAssignment};
use super::structure::free_param_count;
use super::CovStructure;
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// `BIC = -2 l + ρ log n`; smaller is better.
pub fn bic(loglik: f64, rho: usize, n: usize) -> f64 {
    -2.0 * loglik + rho as f64 * (n as f64).ln()
}

/// Starting memberships for EM.
#[derive(Debug, Clone, Default)]
pub enum InitSpec {
    /// One-hot memberships from a k-means partition seeded by the fit seed.
    #[default]
    KMeans,
    Partition(Partition),
    Soft(SoftAssignment),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A fitted model for one (structure, G, restart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MixtureParams,
    pub loglik: f64,
    pub rho: usize,
    pub bic: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub seed: u64,
    /// Log-likelihood after the initial M-step and after every iteration.
    #[serde(default)]
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    pub fn structure(&self) -> CovStructure {
        self.params.structure
    }

    pub fn g(&self) -> usize {
        self.params.g()
    }
}

/// Tracks the Aitken-accelerated asymptotic log-likelihood.
#[derive(Debug, Default)]
struct Aitken {
    history: Vec<f64>,
    last_limit: Option<f64>,
}

impl Aitken {
    /// Records `l` and reports whether the asymptotic estimate moved by
    /// less than `tol`.
    fn push(&mut self, l: f64, tol: f64) -> bool {
        self.history.push(l);
        let k = self.history.len();
        if k < 3 {
            return false;
        }
        let (l0, l1, l2) = (self.history[k - 3], self.history[k - 2], self.history[k - 1]);
        let d1 = l1 - l0;
        let d2 = l2 - l1;
        if d1 == 0.0 || d2 == 0.0 {
            return true;
        }
        let a = d2 / d1;
        if !(a < 1.0) {
            self.last_limit = None;
            return false;
        }
        let limit = l1 + d2 / (1.0 - a);
        let done = matches!(self.last_limit, Some(prev) if (limit - prev).abs() < tol);
        self.last_limit = Some(limit);
        done
    }
}

/// Fits one model by EM.
///
/// Degenerate restarts (an emptied component or a singular covariance)
/// come back as `Err`; callers treat them as failed restarts.
pub fn em_fit(
    data: &Dataset,
    structure: CovStructure,
    g: usize,
    init: &InitSpec,
    config: &EmConfig,
    seed: u64,
) -> Result<FitResult> {
    if !structure.is_fittable() {
        return Err(Error::UnfittableStructure(structure));
    }
    let n = data.n();
    if g == 0 || n <= g {
        return Err(Error::TooFewObservations { n, g });
    }
    let z0 = match init {
        InitSpec::KMeans => SoftAssignment::from_partition(&kmeans_partition(data, g, seed)),
        InitSpec::Partition(p) => {
            if p.k() != g {
                return Err(Error::ClusterCountMismatch {
                    expected: g,
                    found: p.k(),
                });
            }
            SoftAssignment::from_partition(p)
        }
        InitSpec::Soft(z) => {
            if z.g() != g {
                return Err(Error::ClusterCountMismatch {
                    expected: g,
                    found: z.g(),
                });
            }
            z.clone()
        }
    };

    let mut params = m_step(&z0, data, structure)?;
    let (mut z, mut loglik) = e_step_with_loglik(&params, data)?;
    let mut trace = vec![loglik];
    let mut aitken = Aitken::default();
    aitken.push(loglik, config.tol);
    let mut converged = false;
    let mut n_iter = 0;

    while n_iter < config.max_iter {
        let next = m_step_exact(&z, data, structure)?;
        let (next_z, next_loglik) = e_step_with_loglik(&next, data)?;
        n_iter += 1;
        params = next;
        z = next_z;
        loglik = next_loglik;
        trace.push(loglik);
        if aitken.push(loglik, config.tol) {
            converged = true;
            break;
        }
    }

    let rho = free_param_count(structure, g, data.p());
    Ok(FitResult {
        params,
        loglik,
        rho,
        bic: bic(loglik, rho, n),
        n_iter,
        converged,
        seed,
        loglik_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_blob(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn bic_formula() {
        assert_eq!(bic(0.0, 0, 10), 0.0);
        assert_relative_eq!(bic(-500.0, 10, 100), 1046.0517018598809, epsilon = 1e-10);
        let base = bic(-3.0, 4, 50);
        assert_relative_eq!(bic(-3.0, 8, 50) - base, 4.0 * 50f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn single_component_mean() {
        let data = gaussian_blob(200, 3, 9);
        let fit = em_fit(&data, CovStructure::EII, 1, &InitSpec::KMeans, &EmConfig::default(), 1).unwrap();
        let mean = data.values().row_mean().transpose();
        assert!((&fit.params.means[0] - mean).amax() < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn zero_iterations_returns_initial_evaluation() {
        let data = gaussian_blob(50, 2, 4);
        let cfg = EmConfig { tol: 1e-8, max_iter: 0 };
        let fit = em_fit(&data, CovStructure::VVV, 2, &InitSpec::KMeans, &cfg, 5).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.n_iter, 0);
        assert_eq!(fit.loglik_trace.len(), 1);
        assert_relative_eq!(fit.bic, -2.0 * fit.loglik + fit.rho as f64 * 50f64.ln());
    }

    #[test]
    fn rejects_bad_requests() {
        let data = gaussian_blob(5, 2, 1);
        let cfg = EmConfig::default();
        assert!(matches!(
            em_fit(&data, CovStructure::VEE, 2, &InitSpec::KMeans, &cfg, 0),
            Err(Error::UnfittableStructure(_))
        ));
        assert!(matches!(
            em_fit(&data, CovStructure::EII, 5, &InitSpec::KMeans, &cfg, 0),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn aitken_stops_on_geometric_sequence() {
        let mut a = Aitken::default();
        let mut stopped = None;
        for k in 0..200 {
            let l = -10.0 - 0.5f64.powi(k);
            if a.push(l, 1e-8) {
                stopped = Some(k);
                break;
            }
        }
        // a geometric sequence is extrapolated exactly after three terms
        assert_eq!(stopped, Some(3));
    }
}
