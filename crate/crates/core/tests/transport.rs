use enrda_core::ot::{
    build_cost_matrix, mccann_interpolate, optimal_plan, optimal_permutation, sinkhorn,
    wasserstein_distance_squared, DiscreteDistribution, TransportPlan,
};
use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;

fn cloud(dim: usize, values: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::uniform(DMatrix::from_column_slice(dim, values.len() / dim, values)).unwrap()
}

fn weighted_1d(points: &[f64], masses: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::from_1d(points, masses).unwrap()
}

fn entropic(p: &DiscreteDistribution, q: &DiscreteDistribution, gamma: f64) -> TransportPlan {
    let cost = build_cost_matrix(p, q, 2.0).unwrap();
    let (plan, state) = sinkhorn(&cost, p.weights(), q.weights(), gamma, 1e-10, 20_000).unwrap();
    assert!(state.marginal_residual <= 1e-10, "residual {}", state.marginal_residual);
    plan
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-5.0..5.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_distance_is_a_metric(dim in 1usize..=3, n in 2usize..=6, seed in coords(54)) {
        let take = |k: usize| cloud(dim, &seed[k * 18..k * 18 + n * dim]);
        let (p, q, r) = (take(0), take(1), take(2));
        let d = |a: &DiscreteDistribution, b: &DiscreteDistribution| wasserstein_distance_squared(a, b, 0.0).unwrap().sqrt();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-8);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-8);
    }

    #[test]
    fn sinkhorn_cost_is_bracketed_by_the_assignment_oracle(dim in 1usize..=2, n in 8usize..=16, xs in coords(32), ys in coords(32)) {
        let p = cloud(dim, &xs[..n * dim]);
        let q = cloud(dim, &ys[..n * dim]);
        let cost = build_cost_matrix(&p, &q, 2.0).unwrap();
        let (_, total) = optimal_permutation(cost.entries()).unwrap();
        let exact = total / n as f64;
        let gamma = 1e-2 * cost.median();
        let (plan, state) = sinkhorn(&cost, p.weights(), q.weights(), gamma, 1e-8, 10_000).unwrap();
        prop_assert!(state.marginal_residual <= 1e-8);
        prop_assert!(plan.marginal_violation() <= 1e-8);
        // Entropic optimality against a permutation plan (entropy ln n) with
        // H(U) ≤ 2 ln n.
        let slack = 1e-8 * cost.max() * n as f64;
        prop_assert!(plan.transport_cost >= exact - slack);
        prop_assert!(plan.transport_cost <= exact + gamma * (n as f64).ln() + slack);
    }

    #[test]
    fn entropy_grows_with_gamma(xs in coords(6), ys in coords(7), ws in vec(0.05..1.0f64, 7)) {
        let p = cloud(1, &xs);
        let q = weighted_1d(&ys, &ws);
        let max = build_cost_matrix(&p, &q, 2.0).unwrap().max();
        let mut last = f64::NEG_INFINITY;
        for frac in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0] {
            let h = entropic(&p, &q, frac * max).entropy();
            prop_assert!(h >= last - 1e-9, "entropy fell from {last} to {h} at {frac}");
            last = h;
        }
    }

    #[test]
    fn huge_gamma_gives_the_independent_coupling(xs in coords(10), ys in coords(12), ws in vec(0.05..1.0f64, 6)) {
        let p = cloud(2, &xs);
        let q = DiscreteDistribution::from_masses(DMatrix::from_column_slice(2, 6, &ys), DVector::from_column_slice(&ws)).unwrap();
        let max = build_cost_matrix(&p, &q, 2.0).unwrap().max();
        let plan = entropic(&p, &q, 1e4 * max);
        let outer = p.weights() * q.weights().transpose();
        for (u, o) in plan.mass.iter().zip(outer.iter()) {
            prop_assert!((u - o).abs() <= 1e-3 * o);
        }
    }

    #[test]
    fn mccann_mean_is_linear_in_eta(dim in 1usize..=3, xs in coords(30), ys in coords(30), eta in 0.0..=1.0f64, frac in 0.01..1.0f64) {
        let p = cloud(dim, &xs[..5 * dim]);
        let q = cloud(dim, &ys[..7 * dim]);
        let max = build_cost_matrix(&p, &q, 2.0).unwrap().max();
        let plan = entropic(&p, &q, frac * max);
        let mid = mccann_interpolate(&plan, &p, &q, eta).unwrap();
        let expected = p.mean() * eta + q.mean() * (1.0 - eta);
        prop_assert!((mid.mean() - expected).amax() <= 1e-8);
    }

    #[test]
    fn exact_mccann_mean_is_linear(xs in coords(8), ys in coords(8), eta in 0.0..=1.0f64) {
        let p = cloud(2, &xs);
        let q = cloud(2, &ys);
        let plan = optimal_plan(&p, &q, 0.0).unwrap();
        let mid = mccann_interpolate(&plan, &p, &q, eta).unwrap();
        let expected = p.mean() * eta + q.mean() * (1.0 - eta);
        prop_assert!((mid.mean() - expected).amax() <= 1e-12);
    }

    #[test]
    fn distance_splits_into_shape_and_shift(dim in 1usize..=3, xs in coords(18), ys in coords(18), shift in vec(-10.0..10.0f64, 3)) {
        let p = cloud(dim, &xs[..6 * dim]);
        let q = cloud(dim, &ys[..6 * dim]).translated(&DVector::from_column_slice(&shift[..dim]));
        let check = enrda_core::centered_decomposition_check(&p, &q, 0.0).unwrap();
        prop_assert!(check.defect().abs() <= 1e-9 * (1.0 + check.total));
    }

    #[test]
    fn every_plan_respects_its_marginals(xs in coords(9), ys in coords(5), ws in vec(0.0..1.0f64, 5), frac in 0.001..10.0f64) {
        prop_assume!(ws.iter().sum::<f64>() > 0.1);
        let p = cloud(1, &xs);
        let q = weighted_1d(&ys, &ws);
        let cost = build_cost_matrix(&p, &q, 2.0).unwrap();
        let (plan, state) = sinkhorn(&cost, p.weights(), q.weights(), frac * cost.max().max(1e-3), 1e-8, 10_000).unwrap();
        prop_assert!(plan.mass.iter().all(|u| *u >= 0.0));
        prop_assert_eq!(state.marginal_residual, plan.marginal_violation());
        if state.converged(1e-8) {
            prop_assert!(plan.marginal_violation() <= 1e-8);
        }
        let inner = cost.entries().component_mul(&plan.mass).sum();
        prop_assert!((inner - plan.transport_cost).abs() <= 1e-10 * inner.abs().max(1e-300));
    }
}

#[test]
fn one_dimensional_exact_plan_matches_assignment() {
    let p = cloud(1, &[0.3, -1.2, 4.0, 2.2, 0.0]);
    let q = cloud(1, &[1.0, 1.5, -3.0, 0.1, 2.9]);
    let via_assignment = optimal_plan(&p, &q, 0.0).unwrap().transport_cost;
    let via_quantiles = enrda_core::ot::monotone_plan_1d(&p, &q).unwrap().transport_cost;
    assert!((via_assignment - via_quantiles).abs() < 1e-12);
}

#[test]
fn eta_endpoints_recover_the_marginals() {
    let p = cloud(1, &[0.0, 1.0, 5.0]);
    let q = cloud(1, &[2.0, 3.0, 4.0]);
    let plan = optimal_plan(&p, &q, 0.0).unwrap();
    let at_p = mccann_interpolate(&plan, &p, &q, 1.0).unwrap();
    let mut support: Vec<f64> = at_p.support().iter().copied().collect();
    support.sort_by(f64::total_cmp);
    assert_eq!(support, vec![0.0, 1.0, 5.0]);
    let at_q = mccann_interpolate(&plan, &p, &q, 0.0).unwrap();
    let mut support: Vec<f64> = at_q.support().iter().copied().collect();
    support.sort_by(f64::total_cmp);
    assert_eq!(support, vec![2.0, 3.0, 4.0]);
}
