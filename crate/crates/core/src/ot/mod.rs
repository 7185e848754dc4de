//! Discrete optimal transport.
//!
//! Ground costs, the exact assignment solver (used as a test oracle and for
//! uniform equal-size clouds), entropic Sinkhorn couplings with a log-domain
//! path for small regularization, squared 2-Wasserstein distances and
//! displacement interpolation, plus closed-form Gaussian geodesics.

mod assignment;
mod cost;
mod distribution;
mod gaussian;
mod mccann;
mod plan;
mod sinkhorn;
mod wasserstein;

pub use assignment::{optimal_permutation, solve_exact_assignment};
pub use cost::{build_cost_matrix, CostMatrix};
pub use distribution::DiscreteDistribution;
pub use gaussian::{gaussian_w2_distance_squared, gaussian_w2_interpolate, GaussianMoments};
pub use mccann::{mccann_interpolate, ATOM_PRUNE_THRESHOLD};
pub use plan::TransportPlan;
pub use sinkhorn::{
    sinkhorn, sinkhorn_with, SinkhornOptions, SinkhornState, DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE, LOG_DOMAIN_THRESHOLD, ZERO_WEIGHT_THRESHOLD,
};
pub use wasserstein::{
    centered_decomposition_check, monotone_plan_1d, optimal_plan, wasserstein_distance_squared,
    TranslationDecomposition,
};
