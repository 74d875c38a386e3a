use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixavg::gpcm::{em_fit, free_param_count, log_likelihood, CovStructure, EmConfig, InitSpec};
use mixavg::simgen::{generate, separated_clusters_spec, GaussianCluster, gen_gaussian_clusters};
use mixavg::{adjusted_rand_index, e_step, harden, Dataset};

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn loglik_is_monotone_over_random_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    for _ in 0..100 {
        let spec = separated_clusters_spec(rng.random_range(1..=3), rng.random_range(1..=4), 40, rng.random_range(0.5..5.0));
        let data = generate(&spec, rng.random()).unwrap().dataset;
        let s = CovStructure::FITTABLE[rng.random_range(0..10)];
        let g = rng.random_range(1..=4);
        let cfg = EmConfig { tol: 1e-9, max_iter: 200 };
        if let Ok(fit) = em_fit(&data, s, g, &InitSpec::KMeans, &cfg, rng.random()) {
            checked += 1;
            for w in fit.loglik_trace.windows(2) {
                assert!(w[1] - w[0] >= -1e-8, "{s} G={g}: {} -> {}", w[0], w[1]);
            }
            let direct = log_likelihood(&fit.params, &data).unwrap();
            assert!((direct - fit.loglik).abs() <= 1e-8 * direct.abs().max(1.0));
        }
    }
    assert!(checked > 80);
}

#[test]
fn nested_structures_order_likelihoods() {
    // starting VVV from the EEE solution can only improve on it
    let data = Dataset::load_csv(fixture("iris.csv"), Some("Species")).unwrap();
    let cfg = EmConfig::default();
    for g in 1..=4 {
        let eee = em_fit(&data, CovStructure::EEE, g, &InitSpec::KMeans, &cfg, 3).unwrap();
        let z = e_step(&eee.params, &data).unwrap();
        let vvv = em_fit(&data, CovStructure::VVV, g, &InitSpec::Soft(z), &cfg, 3).unwrap();
        assert!(vvv.loglik >= eee.loglik - 1e-8, "G={g}: {} < {}", vvv.loglik, eee.loglik);
        let eii = em_fit(&data, CovStructure::EII, g, &InitSpec::KMeans, &cfg, 3).unwrap();
        let z = e_step(&eii.params, &data).unwrap();
        let vii = em_fit(&data, CovStructure::VII, g, &InitSpec::Soft(z), &cfg, 3).unwrap();
        assert!(vii.loglik >= eii.loglik - 1e-8);
    }
}

#[test]
fn bic_uses_free_parameter_count() {
    let data = Dataset::load_csv(fixture("iris.csv"), Some("Species")).unwrap();
    let fit = em_fit(&data, CovStructure::VEV, 3, &InitSpec::KMeans, &EmConfig::default(), 1).unwrap();
    assert_eq!(fit.rho, free_param_count(CovStructure::VEV, 3, 4));
    assert_eq!(fit.rho, 38);
    let want = -2.0 * fit.loglik + 38.0 * (150f64).ln();
    assert!((fit.bic - want).abs() < 1e-9);
}

#[test]
fn well_separated_clusters_are_recovered() {
    let clusters = [
        GaussianCluster::spherical(100, vec![0.0, 0.0], 1.0),
        GaussianCluster::spherical(100, vec![20.0, 0.0], 1.0),
    ];
    let sim = gen_gaussian_clusters(&clusters, 12).unwrap();
    let data = sim.dataset;
    let fit = em_fit(&data, CovStructure::VVV, 2, &InitSpec::KMeans, &EmConfig::default(), 4).unwrap();
    let part = harden(&e_step(&fit.params, &data).unwrap());
    assert_eq!(adjusted_rand_index(&part, &data.partition_from_labels().unwrap()).unwrap(), 1.0);
}

#[test]
fn unfittable_structures_are_rejected() {
    let data = Dataset::load_csv(fixture("iris.csv"), Some("Species")).unwrap();
    for s in [CovStructure::EVE, CovStructure::VVE, CovStructure::VEE, CovStructure::EVV] {
        assert!(em_fit(&data, s, 2, &InitSpec::KMeans, &EmConfig::default(), 1).is_err());
    }
}

#[test]
fn ridge_is_limited_to_the_initial_m_step() {
    use mixavg::gpcm::{m_step, m_step_exact, SoftAssignment};
    use mixavg::{Error, Partition};
    let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.5], vec![0.3, 1.0], vec![9.0, 9.0]]).unwrap();
    // component 2 holds a single point, so its scatter is zero
    let z = SoftAssignment::from_partition(&Partition::new(vec![0, 0, 0, 1], 2).unwrap());
    assert!(m_step(&z, &data, CovStructure::VII).is_ok());
    assert!(matches!(
        m_step_exact(&z, &data, CovStructure::VII),
        Err(Error::SingularCovariance { component: 2 })
    ));
}
