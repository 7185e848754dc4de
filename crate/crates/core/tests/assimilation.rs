use enrda_core::assimilation::{likelihood_weights, MethodStreams};
use enrda_core::linalg::Covariance;
use enrda_core::{
    enkf_analysis, enrda_analysis, estimate_covariance, multinomial_resample, particle_filter_analysis,
    perturb_observations, three_d_var_analysis, AssimilatorConfig, DiscreteDistribution, Ensemble, EtaPolicy,
    GammaPolicy, Method,
};
use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spd(values: &[f64], n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(n, n, &values[..n * n]);
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

fn gaussian_ensemble(mean: &DVector<f64>, cov: &Covariance, size: usize, seed: u64) -> Ensemble {
    let factor = cov.factor().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = DMatrix::zeros(mean.len(), size);
    for k in 0..size {
        members.set_column(k, &(mean + factor.sample(&mut rng)));
    }
    Ensemble::new(members, 0.0).unwrap()
}

fn enrda_cfg(eta: f64, gamma: f64) -> AssimilatorConfig {
    AssimilatorConfig {
        eta: EtaPolicy::Fixed { value: eta },
        gamma: GammaPolicy::Fixed { value: gamma },
        ensemble_size: 12,
        observation_members: Some(9),
        ..AssimilatorConfig::new("enrda", Method::Enrda)
    }
}

/// Atoms at equal positions merged, sorted by position.
fn merged(h: &DiscreteDistribution) -> Vec<(Vec<f64>, f64)> {
    let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
    for k in 0..h.len() {
        let x: Vec<f64> = h.point(k).iter().copied().collect();
        match atoms.iter_mut().find(|(p, _)| *p == x) {
            Some((_, w)) => *w += h.weights()[k],
            None => atoms.push((x, h.weights()[k])),
        }
    }
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    atoms
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn three_d_var_is_the_kalman_update(b in vec(-1.0..1.0f64, 9), r in vec(-1.0..1.0f64, 9), xb in vec(-5.0..5.0f64, 3), y in vec(-5.0..5.0f64, 3)) {
        let (b, r) = (spd(&b, 3, 0.1), spd(&r, 3, 0.1));
        let (xb, y) = (DVector::from_vec(xb), DVector::from_vec(y));
        let xa = three_d_var_analysis(&xb, &y, &Covariance::Dense(b.clone()), &Covariance::Dense(r.clone())).unwrap();
        let gain = &b * (&b + &r).try_inverse().unwrap();
        let kalman = &xb + gain * (&y - &xb);
        prop_assert!((xa - kalman).amax() <= 1e-10 * (1.0 + xb.amax().max(y.amax())));
    }

    #[test]
    fn particle_weights_are_normalized(m in 2usize..40, spread in 0.1..5.0f64, offset in -10.0..10.0f64, seed in 0u64..1000) {
        let r = Covariance::scaled_identity(2, 0.5);
        let particles = gaussian_ensemble(&DVector::zeros(2), &Covariance::scaled_identity(2, spread), m, seed);
        let y = DVector::from_element(2, offset);
        let w = likelihood_weights(&particles, &y, &r).unwrap();
        prop_assert!((w.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        let result = particle_filter_analysis(&particles, &y, &r, &mut MethodStreams::from_seed(seed)).unwrap();
        let ess = result.diagnostics.effective_sample_size.unwrap();
        prop_assert!((1.0 - 1e-9..=m as f64 + 1e-9).contains(&ess));
        prop_assert_eq!(result.ensemble.size(), m);
    }

    #[test]
    fn enrda_mean_interpolates_the_two_clouds(eta in 0.0..=1.0f64, gamma in 0.05..20.0f64, seed in 0u64..1000) {
        let background = gaussian_ensemble(&DVector::from_vec(vec![1.0, -2.0]), &Covariance::identity(2), 12, seed);
        let y = DVector::from_vec(vec![3.0, 0.5]);
        let r = Covariance::scaled_identity(2, 0.8);
        let cfg = enrda_cfg(eta, gamma);
        let result = enrda_analysis(&background, &y, &r, &cfg, &mut MethodStreams::from_seed(seed)).unwrap();
        let mut replay = MethodStreams::from_seed(seed);
        let observations = perturb_observations(&y, &r, 9, &mut replay.perturbation).unwrap();
        let expected = background.mean() * eta + observations.mean() * (1.0 - eta);
        // Each marginal is met to the 1e-8 Sinkhorn tolerance per atom.
        let scale = background.members.amax().max(observations.support().amax());
        let tol = 1e-8 * (12 + 9) as f64 * scale;
        prop_assert!((&result.mean - &expected).amax() <= tol);
        let histogram = result.histogram.unwrap();
        prop_assert!((histogram.mean() - &expected).amax() <= tol);
        prop_assert_eq!(result.ensemble.size(), 12);
    }
}

#[test]
fn enrda_endpoints_reproduce_the_marginal_histograms() {
    let background = gaussian_ensemble(&DVector::from_vec(vec![0.0, 0.0]), &Covariance::identity(2), 12, 5);
    let y = DVector::from_vec(vec![2.0, 1.0]);
    let r = Covariance::identity(2);
    let at = |eta| {
        let cfg = enrda_cfg(eta, 1.0);
        enrda_analysis(&background, &y, &r, &cfg, &mut MethodStreams::from_seed(9)).unwrap().histogram.unwrap()
    };
    let observations = perturb_observations(&y, &r, 9, &mut MethodStreams::from_seed(9).perturbation).unwrap();
    for (eta, target) in [(1.0, enrda_core::ensemble_to_histogram(&background)), (0.0, observations)] {
        let got = merged(&at(eta));
        let want = merged(&target);
        assert_eq!(got.len(), want.len(), "eta = {eta}");
        for ((gx, gw), (wx, ww)) in got.iter().zip(&want) {
            assert_eq!(gx, wx);
            assert!((gw - ww).abs() <= 1e-8, "eta = {eta}: weight {gw} vs {ww}");
        }
    }
}

#[test]
fn large_enkf_matches_the_kalman_posterior() {
    let (prior_mean, prior_var, obs_var, y) = (1.0, 4.0, 1.0, 3.5);
    let background = gaussian_ensemble(&DVector::from_element(1, prior_mean), &Covariance::scaled_identity(1, prior_var), 100_000, 21);
    let est = estimate_covariance(&background).unwrap();
    let (xb, b) = (est.mean[0], est.matrix[(0, 0)]);
    let post_mean = xb + b / (b + obs_var) * (y - xb);
    let post_var = b * obs_var / (b + obs_var);
    let r = Covariance::scaled_identity(1, obs_var);
    let result = enkf_analysis(&background, &DVector::from_element(1, y), &r, &mut MethodStreams::from_seed(4)).unwrap();
    let analysis = estimate_covariance(&result.ensemble).unwrap();
    assert!((analysis.mean[0] - post_mean).abs() <= 0.02 * post_mean.abs());
    assert!((analysis.matrix[(0, 0)] - post_var).abs() <= 0.02 * post_var);
}

#[test]
fn perturbed_observations_have_covariance_r() {
    let r = Covariance::Dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]));
    let y = DVector::from_vec(vec![4.0, -1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = perturb_observations(&y, &r, 100_000, &mut rng).unwrap();
    let e = Ensemble::new(d.support().clone(), 0.0).unwrap();
    let est = estimate_covariance(&e).unwrap();
    let rel = (&est.matrix - r.to_dense()).norm() / r.to_dense().norm();
    assert!(rel < 0.05, "relative Frobenius error {rel}");
    assert!((est.mean - y).amax() < 0.02);
}

#[test]
fn perturbation_is_bit_reproducible() {
    let r = Covariance::scaled_identity(3, 2.0);
    let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let draw = || perturb_observations(&y, &r, 50, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    assert_eq!(draw(), draw());
}

#[test]
fn resampling_counts_follow_the_weights() {
    let d = DiscreteDistribution::from_1d(&[0.0, 1.0], &[0.3, 0.7]).unwrap();
    let e = multinomial_resample(&d, 100_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let ones = e.members.iter().filter(|v| **v == 1.0).count() as f64;
    assert!((ones - 70_000.0).abs() <= 700.0, "{ones}");
    assert!((e.mean()[0] - 0.7).abs() / 0.7 < 0.01);
}

#[test]
fn sample_covariance_of_many_draws() {
    let cov = Covariance::Diagonal(DVector::from_vec(vec![1.0, 4.0]));
    let e = gaussian_ensemble(&DVector::zeros(2), &cov, 100_000, 12);
    let est = estimate_covariance(&e).unwrap();
    assert!((est.matrix[(0, 0)] - 1.0).abs() < 0.03);
    assert!((est.matrix[(1, 1)] - 4.0).abs() < 0.12);
    assert!((&est.matrix - est.matrix.transpose()).amax() <= 1e-12);
    let eig = est.matrix.symmetric_eigenvalues();
    assert!(eig.min() >= -1e-10);
}
