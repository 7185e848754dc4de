//! Ensemble Riemannian data assimilation.
//!
//! Data assimilation posed as a two-point barycenter problem over the
//! 2-Wasserstein space: the background ensemble and a perturbed observation
//! cloud are coupled with entropic optimal transport (Sinkhorn), the analysis
//! histogram is read off the coupling by McCann displacement interpolation,
//! and the next ensemble is drawn from it by multinomial resampling.
//!
//! Alongside the transport-based method the crate carries the Euclidean
//! baselines (3D-Var, perturbed-observation EnKF, SIR particle filter), the two
//! test dynamics (Lorenz-63 and linear advection-diffusion) and a replicated
//! twin-experiment harness that writes CSV/JSON artifacts.
//!
//! Module map:
//! - [`ot`]: cost matrices, exact assignment, Sinkhorn, Wasserstein distances,
//!   McCann and Gaussian geodesic interpolation.
//! - [`distributions`]: ensembles, histograms, sampling and moments.
//! - [`dynamics`]: forward models, model noise, truth and observation synthesis.
//! - [`assimilation`]: the four analysis schemes and the forecast/analysis cycle.
//! - [`harness`]: experiment configuration, presets, metrics and the runner.

pub mod assimilation;
pub mod distributions;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod ot;
pub mod rng;

pub use assimilation::{
    enkf_analysis, enrda_analysis, particle_filter_analysis, run_assimilation_cycle,
    three_d_var_analysis, AnalysisResult, AssimilatorConfig, CycleDiagnostics, EtaPolicy,
    GammaPolicy, Method,
};
pub use distributions::{
    ensemble_to_histogram, estimate_covariance, multinomial_resample, perturb_observations,
    CovarianceEstimate, Ensemble,
};
pub use dynamics::{
    advect_diffuse_step, apply_model_noise, lorenz63_step, make_truth_trajectory,
    synthesize_observation, AdvectionDiffusionParams, DynamicsSpec, GridField, Lorenz63Params,
    ModelNoiseSpec, NoiseKind,
};
pub use error::{Error, Result};
pub use harness::{compute_metrics, run_experiment, ExperimentConfig, MetricSeries};
pub use linalg::Covariance;
pub use ot::{
    build_cost_matrix, centered_decomposition_check, gaussian_w2_interpolate, mccann_interpolate,
    sinkhorn, solve_exact_assignment, wasserstein_distance_squared, CostMatrix,
    DiscreteDistribution, GaussianMoments, SinkhornState, TransportPlan,
};
