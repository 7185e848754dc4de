use nalgebra::{DMatrix, DVector};

use super::{
    build_cost_matrix, sinkhorn_with, solve_exact_assignment, DiscreteDistribution,
    SinkhornOptions, TransportPlan,
};
use crate::error::{Error, Result};

/// Optimal coupling between two distributions under squared Euclidean cost.
///
/// With `gamma == 0` the plan is exact: a linear assignment for uniform
/// equal-size clouds, or the monotone (north-west corner on sorted supports)
/// coupling in one dimension. Positive `gamma` gives the Sinkhorn plan, which
/// must reach the default marginal tolerance.
pub fn optimal_plan(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    gamma: f64,
) -> Result<TransportPlan> {
    let cost = build_cost_matrix(source, target, 2.0)?;
    if gamma == 0.0 {
        if source.len() == target.len() && source.is_uniform() && target.is_uniform() {
            return solve_exact_assignment(&cost, source.weights(), target.weights());
        }
        if source.dim() == 1 {
            return monotone_plan_1d(source, target);
        }
        return Err(Error::NotAssignment(
            "exact transport needs uniform equal-size clouds or one-dimensional supports".into(),
        ));
    }
    if gamma < 0.0 {
        return Err(Error::invalid("gamma", "must be non-negative"));
    }
    let options = SinkhornOptions::default();
    let (plan, state) = sinkhorn_with(&cost, source.weights(), target.weights(), gamma, &options)?;
    if !state.converged(options.tolerance) {
        return Err(Error::SinkhornNotConverged {
            residual: state.marginal_residual,
            iterations: state.iterations_used,
        });
    }
    Ok(plan)
}

/// `d²_W = ⟨C, U⟩` with `C` the squared Euclidean cost. The entropic value
/// (`gamma > 0`) upper-bounds the exact one.
pub fn wasserstein_distance_squared(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    gamma: f64,
) -> Result<f64> {
    Ok(optimal_plan(source, target, gamma)?.transport_cost)
}

/// Exact optimal plan between two one-dimensional histograms (any sizes,
/// any weights): the comonotone coupling of their quantile functions.
pub fn monotone_plan_1d(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
) -> Result<TransportPlan> {
    if source.dim() != 1 || target.dim() != 1 {
        return Err(Error::DimensionMismatch("monotone coupling is one-dimensional".into()));
    }
    let order = |d: &DiscreteDistribution| {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| d.support()[(0, a)].total_cmp(&d.support()[(0, b)]));
        idx
    };
    let (si, ti) = (order(source), order(target));
    let mut mass = DMatrix::zeros(source.len(), target.len());
    let (mut p, mut q) = (0, 0);
    let mut left_src = source.weights()[si[0]];
    let mut left_tgt = target.weights()[ti[0]];
    while p < si.len() && q < ti.len() {
        let moved = left_src.min(left_tgt);
        mass[(si[p], ti[q])] += moved;
        left_src -= moved;
        left_tgt -= moved;
        // Advance whichever side is exhausted (relative to its own atom).
        if left_src <= left_tgt {
            p += 1;
            if p < si.len() {
                left_src = source.weights()[si[p]];
            }
        } else {
            q += 1;
            if q < ti.len() {
                left_tgt = target.weights()[ti[q]];
            }
        }
    }
    let cost = build_cost_matrix(source, target, 2.0)?;
    Ok(TransportPlan::new(
        mass,
        &cost,
        source.weights().clone(),
        target.weights().clone(),
        0.0,
    ))
}

/// The three terms of `d²_W(p, q) = d²_W(p̄, q̄) + ‖μ_p − μ_q‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationDecomposition {
    pub total: f64,
    pub centered: f64,
    pub mean_shift: f64,
}

impl TranslationDecomposition {
    /// `|total − centered − mean_shift|`.
    pub fn defect(&self) -> f64 {
        (self.total - self.centered - self.mean_shift).abs()
    }
}

/// Computes both sides of the translation identity. Exact for `gamma == 0`
/// on instances the exact solvers accept; approximate for small `gamma > 0`.
pub fn centered_decomposition_check(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    gamma: f64,
) -> Result<TranslationDecomposition> {
    let total = wasserstein_distance_squared(source, target, gamma)?;
    let centered = wasserstein_distance_squared(&source.centered(), &target.centered(), gamma)?;
    let shift: DVector<f64> = source.mean() - target.mean();
    Ok(TranslationDecomposition {
        total,
        centered,
        mean_shift: shift.norm_squared(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_have_zero_distance() {
        let d = DiscreteDistribution::uniform(DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 5.0, -1.0, 0.3]))
            .unwrap();
        assert_eq!(wasserstein_distance_squared(&d, &d, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn diracs() {
        let a = DiscreteDistribution::dirac(DVector::from_vec(vec![1.0, 2.0]));
        let b = DiscreteDistribution::dirac(DVector::from_vec(vec![-1.0, 0.5]));
        let d = wasserstein_distance_squared(&a, &b, 0.0).unwrap();
        assert!((d - (4.0 + 2.25)).abs() < 1e-12);
        // Entropic route has a single feasible coupling as well.
        let d = wasserstein_distance_squared(&a, &b, 0.1).unwrap();
        assert!((d - 6.25).abs() < 1e-12);
    }

    #[test]
    fn monotone_plan_matches_assignment_on_uniform_clouds() {
        let a = DiscreteDistribution::from_1d(&[3.0, -1.0, 0.5, 2.0], &[1.0; 4]).unwrap();
        let b = DiscreteDistribution::from_1d(&[0.0, 4.0, 1.0, -2.0], &[1.0; 4]).unwrap();
        let exact = optimal_plan(&a, &b, 0.0).unwrap();
        let mono = monotone_plan_1d(&a, &b).unwrap();
        assert!((exact.transport_cost - mono.transport_cost).abs() < 1e-12);
        assert!(mono.marginal_violation() < 1e-15);
    }

    #[test]
    fn monotone_plan_unequal_sizes() {
        // Half of the mass at 0 goes to 1, half to 3: cost 0.5*1 + 0.5*9 = 5.
        let a = DiscreteDistribution::from_1d(&[0.0], &[1.0]).unwrap();
        let b = DiscreteDistribution::from_1d(&[3.0, 1.0], &[1.0, 1.0]).unwrap();
        let plan = monotone_plan_1d(&a, &b).unwrap();
        assert!((plan.transport_cost - 5.0).abs() < 1e-15);
    }

    #[test]
    fn exact_route_rejects_general_multivariate_histograms() {
        let a = DiscreteDistribution::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
            DVector::from_vec(vec![0.3, 0.7]),
        )
        .unwrap();
        assert!(matches!(optimal_plan(&a, &a, 0.0), Err(Error::NotAssignment(_))));
    }

    #[test]
    fn pure_translation() {
        let a = DiscreteDistribution::uniform(DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 0.0, 3.0, -1.0]))
            .unwrap();
        let t = DVector::from_vec(vec![2.0, -1.0]);
        let dec = centered_decomposition_check(&a, &a.translated(&t), 0.0).unwrap();
        assert!(dec.centered.abs() < 1e-12);
        assert!((dec.total - 5.0).abs() < 1e-12);
        assert!((dec.mean_shift - 5.0).abs() < 1e-12);
    }
}
