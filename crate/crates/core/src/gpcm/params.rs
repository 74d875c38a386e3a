use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::density::{log_sum_exp, GaussianTerm};
use super::CovStructure;
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};

/// Eigen-decomposition `Σ = λ D diag(A) D'` of one component covariance,
/// with `det(diag(A)) = 1`. Axis-aligned structures carry no orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub volume: f64,
    pub shape: DVector<f64>,
    pub orientation: Option<DMatrix<f64>>,
}

impl Decomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.shape * self.volume;
        match &self.orientation {
            None => DMatrix::from_diagonal(&scaled),
            Some(d) => {
                let mut ds = d.clone();
                for (j, mut col) in ds.column_iter_mut().enumerate() {
                    col *= scaled[j];
                }
                let s = ds * d.transpose();
                symmetrize(&s)
            }
        }
    }

    /// Decomposes an arbitrary SPD matrix with eigenvalues sorted descending.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let (values, vectors) = sorted_eigen(cov);
        if values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let (volume, shape) = volume_and_shape(&values).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            volume,
            shape,
            orientation: Some(vectors),
        })
    }

    /// Smallest over largest eigenvalue.
    pub fn rcond(&self) -> f64 {
        let max = self.shape.max();
        let min = self.shape.min();
        min / max
    }
}

/// Splits positive values into `(geometric mean, values / geometric mean)`.
pub(crate) fn volume_and_shape(values: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    let gm = mean_log.exp();
    if !(gm > 0.0) || !gm.is_finite() {
        return None;
    }
    Some((gm, values / gm))
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = symmetrize(m).symmetric_eigen();
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// One fitted Gaussian mixture: proportions, means and covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub structure: CovStructure,
    pub pi: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub decomposition: Vec<Decomposition>,
}

impl MixtureParams {
    /// Builds parameters from raw covariances, decomposing each one.
    pub fn new(
        structure: CovStructure,
        pi: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let g = pi.len();
        if g == 0 || means.len() != g || covariances.len() != g {
            return Err(Error::InvalidArgument(
                "pi, means and covariances must have equal non-zero length".into(),
            ));
        }
        if pi.iter().any(|&w| !(w > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "mixing proportions must be positive and sum to 1".into(),
            ));
        }
        let p = means[0].len();
        for (m, s) in means.iter().zip(&covariances) {
            if m.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: m.len(),
                });
            }
            if s.nrows() != p || s.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: s.nrows(),
                });
            }
        }
        let covariances: Vec<DMatrix<f64>> = covariances.iter().map(symmetrize).collect();
        let decomposition = covariances
            .iter()
            .map(Decomposition::from_covariance)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            structure,
            pi,
            means,
            covariances,
            decomposition,
        })
    }

    pub fn g(&self) -> usize {
        self.pi.len()
    }

    pub fn p(&self) -> usize {
        self.means[0].len()
    }

    pub(crate) fn terms(&self) -> Result<Vec<GaussianTerm>> {
        self.means
            .iter()
            .zip(&self.covariances)
            .map(|(m, s)| GaussianTerm::new(m, s))
            .collect()
    }

    /// Mixture density `Σ_g π_g φ(x | μ_g, Σ_g)` at one point.
    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        let terms = self.terms()?;
        let logs: Vec<f64> = terms
            .iter()
            .zip(&self.pi)
            .map(|(t, w)| w.ln() + t.log_density(x.as_view()))
            .collect();
        Ok(log_sum_exp(&logs).exp())
    }
}

/// Membership probabilities `ẑ_{ig}`, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    z: DMatrix<f64>,
}

impl SoftAssignment {
    /// Wraps a matrix whose rows are probability vectors.
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::InvalidArgument("empty membership matrix".into()));
        }
        for (i, row) in z.row_iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "membership row {} has entries outside [0, 1]",
                    i + 1
                )));
            }
            if (row.sum() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "membership row {} sums to {}",
                    i + 1,
                    row.sum()
                )));
            }
        }
        Ok(Self { z })
    }

    pub(crate) fn from_matrix_unchecked(z: DMatrix<f64>) -> Self {
        Self { z }
    }

    /// One-hot memberships from a hard partition.
    pub fn from_partition(p: &Partition) -> Self {
        let mut z = DMatrix::zeros(p.len(), p.k());
        for (i, &a) in p.assignments().iter().enumerate() {
            z[(i, a)] = 1.0;
        }
        Self { z }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn g(&self) -> usize {
        self.z.ncols()
    }

    /// Reorders columns: output column `j` is input column `order[j]`.
    pub fn permute_columns(&self, order: &[usize]) -> Self {
        let z = DMatrix::from_fn(self.n(), order.len(), |i, j| self.z[(i, order[j])]);
        Self { z }
    }
}

/// Computes `ẑ_{ig} = π_g φ_g(x_i) / Σ_h π_h φ_h(x_i)` in the log domain.
pub fn e_step(params: &MixtureParams, data: &Dataset) -> Result<SoftAssignment> {
    e_step_with_loglik(params, data).map(|(z, _)| z)
}

/// Observed-data log-likelihood `Σ_i log Σ_g π_g φ(x_i | μ_g, Σ_g)`.
pub fn log_likelihood(params: &MixtureParams, data: &Dataset) -> Result<f64> {
    e_step_with_loglik(params, data).map(|(_, l)| l)
}

/// E-step and log-likelihood in one pass.
pub fn e_step_with_loglik(params: &MixtureParams, data: &Dataset) -> Result<(SoftAssignment, f64)> {
    if data.p() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: data.p(),
        });
    }
    let g = params.g();
    let n = data.n();
    let terms = params.terms()?;
    let log_pi: Vec<f64> = params.pi.iter().map(|w| w.ln()).collect();
    let x = data.values().transpose();
    let mut z = DMatrix::zeros(n, g);
    let mut loglik = 0.0;
    let mut buf = vec![0.0; g];
    for i in 0..n {
        let xi = x.column(i);
        for k in 0..g {
            buf[k] = log_pi[k] + terms[k].log_density(xi.as_view());
        }
        let lse = log_sum_exp(&buf);
        if !lse.is_finite() {
            return Err(Error::NonFiniteLikelihood);
        }
        loglik += lse;
        for k in 0..g {
            z[(i, k)] = (buf[k] - lse).exp();
        }
    }
    Ok((SoftAssignment { z }, loglik))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpcm::density::component_density;
    use approx::assert_relative_eq;

    fn two_component() -> MixtureParams {
        MixtureParams::new(
            CovStructure::VVV,
            vec![0.5, 0.5],
            vec![DVector::from_vec(vec![-1.0, 0.0]), DVector::from_vec(vec![1.0, 0.0])],
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
        )
        .unwrap()
    }

    #[test]
    fn single_component_membership_is_one() {
        let params = MixtureParams::new(
            CovStructure::EII,
            vec![1.0],
            vec![DVector::zeros(2)],
            vec![DMatrix::identity(2, 2)],
        )
        .unwrap();
        let data = Dataset::from_rows(&[vec![0.0, 1.0], vec![5.0, -3.0], vec![100.0, 0.0]]).unwrap();
        let z = e_step(&params, &data).unwrap();
        assert!(z.matrix().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn midpoint_is_split_evenly() {
        let data = Dataset::from_rows(&[vec![0.0, 0.7]]).unwrap();
        let z = e_step(&two_component(), &data).unwrap();
        assert_relative_eq!(z.matrix()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(z.matrix()[(0, 1)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn matches_direct_evaluation() {
        let params = MixtureParams::new(
            CovStructure::VVV,
            vec![0.3, 0.7],
            vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![2.0, 1.0])],
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
                DMatrix::from_row_slice(2, 2, &[2.0, -0.3, -0.3, 1.5]),
            ],
        )
        .unwrap();
        let rows = vec![vec![0.1, -0.2], vec![1.0, 0.5], vec![3.0, 2.0]];
        let data = Dataset::from_rows(&rows).unwrap();
        let (z, ll) = e_step_with_loglik(&params, &data).unwrap();
        let mut expected_ll = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let x = DVector::from_vec(r.clone());
            let num: Vec<f64> = (0..2)
                .map(|g| {
                    params.pi[g] * component_density(&x, &params.means[g], &params.covariances[g]).unwrap()
                })
                .collect();
            let den: f64 = num.iter().sum();
            expected_ll += den.ln();
            for g in 0..2 {
                assert_relative_eq!(z.matrix()[(i, g)], num[g] / den, max_relative = 1e-12);
            }
        }
        assert_relative_eq!(ll, expected_ll, max_relative = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let data = Dataset::from_rows(&[vec![0.0]]).unwrap();
        assert!(matches!(
            e_step(&two_component(), &data),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decomposition_round_trip() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let d = Decomposition::from_covariance(&s).unwrap();
        assert_relative_eq!(d.shape.iter().product::<f64>(), 1.0, epsilon = 1e-12);
        let r = d.reconstruct();
        assert!((&r - &s).norm() / s.norm() < 1e-12);
    }

    #[test]
    fn mixture_density_sums_terms() {
        let params = two_component();
        let x = DVector::from_vec(vec![0.4, -0.1]);
        let direct: f64 = (0..2)
            .map(|g| 0.5 * component_density(&x, &params.means[g], &params.covariances[g]).unwrap())
            .sum();
        assert_relative_eq!(params.density(&x).unwrap(), direct, max_relative = 1e-13);
    }
}
