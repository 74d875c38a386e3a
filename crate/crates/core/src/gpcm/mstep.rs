//! Constrained M-steps for the ten fittable structures.
//!
//! Each estimator works from the weighted scatter matrices
//! `W_g = Σ_i z_ig (x_i - μ_g)(x_i - μ_g)'` and returns the volume, shape
//! and orientation of every component. VEI and VEV alternate between the
//! per-component volumes and the common shape until both settle.

use nalgebra::{DMatrix, DVector};

use super::params::{sorted_eigen, symmetrize, volume_and_shape, Decomposition, MixtureParams, SoftAssignment};
use super::CovStructure;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance for the VEI/VEV volume-shape alternation.
pub const INNER_TOL: f64 = 1e-10;
pub const INNER_MAX_ITER: usize = 200;
/// Components with `Σ_i z_ig` below this fraction of `n` count as empty.
pub const EMPTY_MASS_FRACTION: f64 = 1e-8;
/// Ridge added to a failed covariance, as a fraction of `tr(W)/(n p)`.
pub const RIDGE_FRACTION: f64 = 1e-8;

/// Covariances whose smallest/largest eigenvalue ratio falls below this
/// are treated as singular.
pub fn min_rcond() -> f64 {
    f64::EPSILON.sqrt()
}

struct Moments {
    mass: Vec<f64>,
    means: Vec<DVector<f64>>,
    scatter: Vec<DMatrix<f64>>,
}

fn moments(z: &SoftAssignment, data: &Dataset) -> Result<Moments> {
    let n = data.n();
    let p = data.p();
    let zm = z.matrix();
    let x = data.values();
    let mut mass = Vec::with_capacity(z.g());
    let mut means = Vec::with_capacity(z.g());
    let mut scatter = Vec::with_capacity(z.g());
    for g in 0..z.g() {
        let w = zm.column(g);
        let ng: f64 = w.sum();
        if !(ng >= EMPTY_MASS_FRACTION * n as f64) {
            return Err(Error::EmptyComponent {
                component: g + 1,
                mass: ng,
            });
        }
        let mean = (x.transpose() * w) / ng;
        let mut centered = x.clone();
        for j in 0..p {
            let mut col = centered.column_mut(j);
            col.add_scalar_mut(-mean[j]);
        }
        let mut weighted = centered.clone();
        for i in 0..n {
            let wi = w[i];
            weighted.row_mut(i).scale_mut(wi);
        }
        let s = symmetrize(&(centered.transpose() * weighted));
        mass.push(ng);
        means.push(mean);
        scatter.push(s);
    }
    Ok(Moments {
        mass,
        means,
        scatter,
    })
}

/// Estimates parameters for `structure` from membership weights `z`.
///
/// If the estimate is singular, a small ridge is added to every scatter
/// matrix and the estimate is retried once.
pub fn m_step(z: &SoftAssignment, data: &Dataset, structure: CovStructure) -> Result<MixtureParams> {
    m_step_with(z, data, structure, true)
}

/// M-step without the ridge fallback: a singular estimate is an error.
///
/// EM iterations use this form, since a ridge changes the objective and
/// would break the monotone ascent of the likelihood; a component that
/// collapses onto a point ends the fit instead.
pub fn m_step_exact(z: &SoftAssignment, data: &Dataset, structure: CovStructure) -> Result<MixtureParams> {
    m_step_with(z, data, structure, false)
}

fn m_step_with(z: &SoftAssignment, data: &Dataset, structure: CovStructure, ridge: bool) -> Result<MixtureParams> {
    if !structure.is_fittable() {
        return Err(Error::UnfittableStructure(structure));
    }
    if z.n() != data.n() {
        return Err(Error::LengthMismatch {
            left: z.n(),
            right: data.n(),
        });
    }
    let mut m = moments(z, data)?;
    let n = data.n() as f64;
    let pi: Vec<f64> = m.mass.iter().map(|ng| ng / n).collect();

    let decomposition = match estimate(structure, &m.mass, &m.scatter, n) {
        Some(d) if healthy(&d) => d,
        Some(d) if !ridge => {
            let component = d.iter().position(|c| !component_healthy(c)).unwrap_or(0) + 1;
            return Err(Error::SingularCovariance { component });
        }
        None if !ridge => return Err(Error::SingularCovariance { component: 1 }),
        _ => {
            let p = data.p() as f64;
            let total_trace: f64 = m.scatter.iter().map(|w| w.trace()).sum();
            let ridge = RIDGE_FRACTION * total_trace / (n * p);
            for (w, ng) in m.scatter.iter_mut().zip(&m.mass) {
                for j in 0..data.p() {
                    w[(j, j)] += ng * ridge;
                }
            }
            match estimate(structure, &m.mass, &m.scatter, n) {
                Some(d) if healthy(&d) => d,
                Some(d) => {
                    let component = d.iter().position(|c| !component_healthy(c)).unwrap_or(0) + 1;
                    return Err(Error::SingularCovariance { component });
                }
                None => return Err(Error::SingularCovariance { component: 1 }),
            }
        }
    };

    let covariances: Vec<DMatrix<f64>> = decomposition.iter().map(Decomposition::reconstruct).collect();
    Ok(MixtureParams {
        structure,
        pi,
        means: m.means,
        covariances,
        decomposition,
    })
}

fn component_healthy(d: &Decomposition) -> bool {
    d.volume > 0.0
        && d.volume.is_finite()
        && d.shape.iter().all(|v| *v > 0.0 && v.is_finite())
        && d.rcond() >= min_rcond()
}

fn healthy(ds: &[Decomposition]) -> bool {
    ds.iter().all(component_healthy)
}

fn axis(volume: f64, shape: DVector<f64>) -> Decomposition {
    Decomposition {
        volume,
        shape,
        orientation: None,
    }
}

fn estimate(structure: CovStructure, mass: &[f64], scatter: &[DMatrix<f64>], n: f64) -> Option<Vec<Decomposition>> {
    let g = mass.len();
    let p = scatter[0].nrows();
    let pf = p as f64;
    let ones = DVector::from_element(p, 1.0);
    let pooled = || scatter.iter().fold(DMatrix::zeros(p, p), |acc, w| acc + w);

    let out = match structure {
        CovStructure::EII => {
            let lambda = pooled().trace() / (n * pf);
            vec![axis(lambda, ones); g]
        }
        CovStructure::VII => scatter
            .iter()
            .zip(mass)
            .map(|(w, ng)| axis(w.trace() / (ng * pf), ones.clone()))
            .collect(),
        CovStructure::EEI => {
            let (gm, shape) = volume_and_shape(&pooled().diagonal())?;
            vec![axis(gm / n, shape); g]
        }
        CovStructure::VEI => {
            let diags: Vec<DVector<f64>> = scatter.iter().map(|w| w.diagonal()).collect();
            let (volumes, shape) = alternate_volume_shape(&diags, mass)?;
            volumes.into_iter().map(|v| axis(v, shape.clone())).collect()
        }
        CovStructure::EVI => {
            let parts: Vec<(f64, DVector<f64>)> = scatter
                .iter()
                .map(|w| volume_and_shape(&w.diagonal()))
                .collect::<Option<_>>()?;
            let lambda = parts.iter().map(|(gm, _)| gm).sum::<f64>() / n;
            parts.into_iter().map(|(_, a)| axis(lambda, a)).collect()
        }
        CovStructure::VVI => scatter
            .iter()
            .zip(mass)
            .map(|(w, ng)| volume_and_shape(&(w.diagonal() / *ng)).map(|(v, a)| axis(v, a)))
            .collect::<Option<_>>()?,
        CovStructure::EEE => {
            let (values, vectors) = sorted_eigen(&(pooled() / n));
            let (v, a) = volume_and_shape(&values)?;
            vec![
                Decomposition {
                    volume: v,
                    shape: a,
                    orientation: Some(vectors),
                };
                g
            ]
        }
        CovStructure::EEV => {
            let eig: Vec<(DVector<f64>, DMatrix<f64>)> = scatter.iter().map(sorted_eigen).collect();
            let total = eig.iter().fold(DVector::zeros(p), |acc, (vals, _)| acc + vals);
            let (gm, shape) = volume_and_shape(&total)?;
            eig.into_iter()
                .map(|(_, vecs)| Decomposition {
                    volume: gm / n,
                    shape: shape.clone(),
                    orientation: Some(vecs),
                })
                .collect()
        }
        CovStructure::VEV => {
            let eig: Vec<(DVector<f64>, DMatrix<f64>)> = scatter.iter().map(sorted_eigen).collect();
            let values: Vec<DVector<f64>> = eig.iter().map(|(v, _)| v.map(|x| x.max(0.0))).collect();
            let (volumes, shape) = alternate_volume_shape(&values, mass)?;
            eig.into_iter()
                .zip(volumes)
                .map(|((_, vecs), v)| Decomposition {
                    volume: v,
                    shape: shape.clone(),
                    orientation: Some(vecs),
                })
                .collect()
        }
        CovStructure::VVV => scatter
            .iter()
            .zip(mass)
            .map(|(w, ng)| {
                let (values, vectors) = sorted_eigen(&(w / *ng));
                volume_and_shape(&values).map(|(v, a)| Decomposition {
                    volume: v,
                    shape: a,
                    orientation: Some(vectors),
                })
            })
            .collect::<Option<_>>()?,
        CovStructure::EVE | CovStructure::VVE | CovStructure::VEE | CovStructure::EVV => return None,
    };
    Some(out)
}

/// Maximizes `-Σ_g [n_g p log λ_g + Σ_j ω_gj / (λ_g a_j)]` over volumes
/// `λ_g` and a common shape `a` with unit product, where `ω_g` are the
/// per-component scatter eigenvalues (or diagonals).
fn alternate_volume_shape(omega: &[DVector<f64>], mass: &[f64]) -> Option<(Vec<f64>, DVector<f64>)> {
    let p = omega[0].len();
    let pf = p as f64;
    let mut volumes: Vec<f64> = omega.iter().zip(mass).map(|(w, ng)| w.sum() / (ng * pf)).collect();
    let mut shape = DVector::from_element(p, 1.0);
    for _ in 0..INNER_MAX_ITER {
        let weighted = omega
            .iter()
            .zip(&volumes)
            .fold(DVector::zeros(p), |acc, (w, v)| acc + w / *v);
        let (_, new_shape) = volume_and_shape(&weighted)?;
        let new_volumes: Vec<f64> = omega
            .iter()
            .zip(mass)
            .map(|(w, ng)| w.component_div(&new_shape).sum() / (ng * pf))
            .collect();
        let shape_change = (&new_shape - &shape).amax() / new_shape.amax();
        let vol_change = volumes
            .iter()
            .zip(&new_volumes)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        shape = new_shape;
        volumes = new_volumes;
        if !(shape_change >= INNER_TOL || vol_change >= INNER_TOL) {
            break;
        }
    }
    if volumes.iter().all(|v| *v > 0.0 && v.is_finite()) {
        Some((volumes, shape))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Partition;
    use approx::assert_relative_eq;

    fn sample() -> Dataset {
        Dataset::from_rows(&[
            vec![0.0, 1.0],
            vec![1.0, 3.0],
            vec![2.0, 2.0],
            vec![0.5, 0.2],
            vec![10.0, 10.0],
            vec![12.0, 9.0],
            vec![11.0, 13.0],
            vec![10.5, 11.5],
        ])
        .unwrap()
    }

    fn hard(labels: &[usize], k: usize) -> SoftAssignment {
        SoftAssignment::from_partition(&Partition::new(labels.to_vec(), k).unwrap())
    }

    fn weighted_cov(data: &Dataset, members: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let rows: Vec<DVector<f64>> = members
            .iter()
            .map(|&i| data.values().row(i).transpose().into_owned())
            .collect();
        let k = rows.len() as f64;
        let mean = rows.iter().fold(DVector::zeros(2), |a, r| a + r) / k;
        let mut cov = DMatrix::zeros(2, 2);
        for r in &rows {
            let d = r - &mean;
            cov += &d * d.transpose();
        }
        (mean, cov / k)
    }

    #[test]
    fn single_component_is_sample_mle() {
        let data = sample();
        let z = hard(&[0; 8], 1);
        let (mean, cov) = weighted_cov(&data, &(0..8).collect::<Vec<_>>());
        for s in CovStructure::FITTABLE {
            let params = m_step(&z, &data, s).unwrap();
            assert_relative_eq!((&params.means[0] - &mean).norm(), 0.0, epsilon = 1e-12);
            assert_eq!(params.pi, vec![1.0]);
            let sig = &params.covariances[0];
            match s {
                CovStructure::EII | CovStructure::VII => {
                    assert_relative_eq!(sig[(0, 0)], cov.trace() / 2.0, max_relative = 1e-12);
                    assert_eq!(sig[(0, 1)], 0.0);
                }
                CovStructure::EEI | CovStructure::VEI | CovStructure::EVI | CovStructure::VVI => {
                    assert_relative_eq!(sig[(0, 0)], cov[(0, 0)], max_relative = 1e-9);
                    assert_relative_eq!(sig[(1, 1)], cov[(1, 1)], max_relative = 1e-9);
                }
                _ => assert!((sig - &cov).norm() / cov.norm() < 1e-9, "{s}"),
            }
        }
    }

    #[test]
    fn eii_shares_pooled_isotropic_variance() {
        let data = sample();
        let z = hard(&[0, 0, 0, 0, 1, 1, 1, 1], 2);
        let params = m_step(&z, &data, CovStructure::EII).unwrap();
        assert_eq!(params.covariances[0], params.covariances[1]);
        let (_, c1) = weighted_cov(&data, &[0, 1, 2, 3]);
        let (_, c2) = weighted_cov(&data, &[4, 5, 6, 7]);
        let pooled = (c1.trace() * 4.0 + c2.trace() * 4.0) / (8.0 * 2.0);
        assert_relative_eq!(params.covariances[0][(0, 0)], pooled, max_relative = 1e-12);
    }

    #[test]
    fn vvv_is_group_covariance() {
        let data = sample();
        let z = hard(&[0, 0, 0, 0, 1, 1, 1, 1], 2);
        let params = m_step(&z, &data, CovStructure::VVV).unwrap();
        for (g, members) in [[0, 1, 2, 3], [4, 5, 6, 7]].iter().enumerate() {
            let (mean, cov) = weighted_cov(&data, members);
            assert!((&params.means[g] - mean).norm() < 1e-12);
            assert!((&params.covariances[g] - &cov).norm() / cov.norm() < 1e-12);
        }
    }

    #[test]
    fn shapes_have_unit_determinant_and_reconstruct() {
        let data = sample();
        let z = hard(&[0, 1, 0, 1, 1, 0, 1, 0], 2);
        for s in CovStructure::FITTABLE {
            let params = m_step(&z, &data, s).unwrap();
            for (d, sig) in params.decomposition.iter().zip(&params.covariances) {
                assert_relative_eq!(d.shape.iter().product::<f64>(), 1.0, epsilon = 1e-10);
                let r = d.reconstruct();
                assert!((&r - sig).norm() / sig.norm() < 1e-8);
            }
        }
    }

    #[test]
    fn structural_constraints_hold() {
        let data = sample();
        let z = hard(&[0, 1, 0, 1, 1, 0, 0, 1], 2);
        let get = |s| m_step(&z, &data, s).unwrap();
        let eee = get(CovStructure::EEE);
        assert!((&eee.covariances[0] - &eee.covariances[1]).norm() < 1e-12);
        let eev = get(CovStructure::EEV);
        assert_relative_eq!(eev.decomposition[0].volume, eev.decomposition[1].volume);
        assert!((&eev.decomposition[0].shape - &eev.decomposition[1].shape).norm() < 1e-12);
        let vei = get(CovStructure::VEI);
        assert!((&vei.decomposition[0].shape - &vei.decomposition[1].shape).norm() < 1e-12);
        let evi = get(CovStructure::EVI);
        assert_relative_eq!(evi.decomposition[0].volume, evi.decomposition[1].volume);
        let vev = get(CovStructure::VEV);
        assert!((&vev.decomposition[0].shape - &vev.decomposition[1].shape).norm() < 1e-12);
    }

    #[test]
    fn rejects_unfittable_and_empty() {
        let data = sample();
        let z = hard(&[0; 8], 2);
        assert!(matches!(
            m_step(&z, &data, CovStructure::EVE),
            Err(Error::UnfittableStructure(CovStructure::EVE))
        ));
        assert!(matches!(
            m_step(&z, &data, CovStructure::VVV),
            Err(Error::EmptyComponent { component: 2, .. })
        ));
    }

    #[test]
    fn singular_scatter_fails() {
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![5.0, 1.0]]).unwrap();
        let z = hard(&[0, 0, 0, 1], 2);
        assert!(matches!(
            m_step(&z, &data, CovStructure::VVV),
            Err(Error::SingularCovariance { .. })
        ));
    }
}
