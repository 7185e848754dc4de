//! The three reference twin experiments with all their constants.

use super::config::{ExperimentConfig, MetricOptions};
use crate::assimilation::{AssimilatorConfig, BPolicy, EtaPolicy, GammaPolicy, Method};
use crate::dynamics::{
    AdvectionDiffusionParams, BackgroundStart, DynamicsSpec, Lorenz63Params, ModelNoiseSpec,
    NoiseKind, ObservationSpec, PointSource,
};

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 3] = ["ad1d", "ad2d", "lorenz63"];

pub fn preset(name: &str, replicates: usize, seed: u64) -> Option<ExperimentConfig> {
    match name {
        "ad1d" => Some(ad1d(replicates, seed)),
        "ad2d" => Some(ad2d(replicates, seed)),
        "lorenz63" => Some(lorenz63(replicates, seed)),
        _ => None,
    }
}

fn relative(level: f64) -> ModelNoiseSpec {
    ModelNoiseSpec { kind: NoiseKind::HeteroscedasticRelative, level }
}

fn isotropic(level: f64) -> ModelNoiseSpec {
    ModelNoiseSpec { kind: NoiseKind::HomoscedasticIsotropic, level }
}

/// Lorenz-63 with biased parameters, observations every 40 steps over
/// `T = 20`, and EnRDA / EnKF / particle filter with 100 members each.
pub fn lorenz63(replicates: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "lorenz63".into(),
        horizon: 20.0,
        interval: 40,
        replicates,
        base_seed: seed,
        output_dir: None,
        workers: None,
        members_dump_max_dim: 16,
        metrics: MetricOptions::default(),
        dynamics: DynamicsSpec::Lorenz63 {
            truth: Lorenz63Params::truth(),
            biased: Lorenz63Params::biased(),
            initial_state: vec![1.508870, -1.531271, 25.46091],
            initial_noise: isotropic(2.0),
            model_noise: isotropic(0.02),
            observation: ObservationSpec::CorrelatedGaussian { variance: 2.0, bands: vec![1.0, 0.5, 0.25] },
        },
        assimilators: vec![
            AssimilatorConfig::new("enrda", Method::Enrda),
            AssimilatorConfig::new("enkf", Method::Enkf),
            AssimilatorConfig::new("particle_filter", Method::ParticleFilter),
        ],
    }
}

fn ad1d_params(velocity: f64, diffusivity: f64) -> AdvectionDiffusionParams {
    AdvectionDiffusionParams {
        velocity: vec![velocity],
        diffusivity: vec![diffusivity],
        spacing: vec![0.1],
        extent: vec![60.0],
        dt: 0.5,
    }
}

/// 1-D advection-diffusion on `(0, 60]`: a bimodal initial state from two
/// point masses of 300, a slow and over-diffusive forecast model, and
/// observations every 10 steps of 0.5 over `T = 30`. EnRDA (`η = 0.2`,
/// `γ = 3`, 100 members) against 3D-Var with cycled heteroscedastic `B`.
pub fn ad1d(replicates: usize, seed: u64) -> ExperimentConfig {
    let source = |age| PointSource { mass: 300.0, age, position: vec![0.0] };
    ExperimentConfig {
        name: "ad1d".into(),
        horizon: 30.0,
        interval: 10,
        replicates,
        base_seed: seed,
        output_dir: None,
        workers: None,
        members_dump_max_dim: 16,
        metrics: MetricOptions::default(),
        dynamics: DynamicsSpec::AdvectionDiffusion {
            truth: ad1d_params(0.8, 0.25),
            biased: ad1d_params(0.12, 0.4),
            sources: vec![source(15.0), source(25.0)],
            background_start: BackgroundStart::Truth,
            initial_noise: relative(0.02),
            model_noise: relative(0.02),
            observation: ObservationSpec::Heteroscedastic { epsilon: 0.05 },
        },
        assimilators: vec![
            AssimilatorConfig {
                eta: EtaPolicy::Fixed { value: 0.2 },
                gamma: GammaPolicy::Fixed { value: 3.0 },
                ..AssimilatorConfig::new("enrda", Method::Enrda)
            },
            AssimilatorConfig {
                b_policy: Some(BPolicy::Heteroscedastic { epsilon: 0.02 }),
                ..AssimilatorConfig::new("three_d_var", Method::ThreeDVar)
            },
        ],
    }
}

fn ad2d_params(velocity: f64, diffusivity: f64) -> AdvectionDiffusionParams {
    AdvectionDiffusionParams {
        velocity: vec![velocity; 2],
        diffusivity: vec![diffusivity; 2],
        spacing: vec![0.1, 0.1],
        extent: vec![10.0, 10.0],
        dt: 0.5,
    }
}

/// Displacement parameters of the 2-D sweep; 3D-Var is run at the matching
/// background weights `α`.
pub const AD2D_WEIGHTS: [f64; 3] = [0.25, 0.5, 0.75];

/// Sinkhorn stopping rule of the 2-D EnRDA runs.
pub const AD2D_SINKHORN_TOLERANCE: f64 = 1e-6;
pub const AD2D_SINKHORN_MAX_ITERATIONS: usize = 50_000;

/// 2-D advection-diffusion on `(0, 10]²` with a single analysis. The
/// background is the pair of point masses (1000 and 4000, ages 25 and 35)
/// evolved with a too-fast, under-diffusive model; observations are a
/// lower-mass twin (800 and 2400) box-averaged over 2×2 cells.
pub fn ad2d(replicates: usize, seed: u64) -> ExperimentConfig {
    let source = |mass, age| PointSource { mass, age, position: vec![0.0, 0.0] };
    let mut assimilators = Vec::new();
    for w in AD2D_WEIGHTS {
        assimilators.push(AssimilatorConfig {
            eta: EtaPolicy::Fixed { value: w },
            gamma: GammaPolicy::Fixed { value: 0.003 },
            sinkhorn_tolerance: AD2D_SINKHORN_TOLERANCE,
            sinkhorn_max_iterations: AD2D_SINKHORN_MAX_ITERATIONS,
            ..AssimilatorConfig::new(format!("enrda_eta_{w}"), Method::Enrda)
        });
    }
    for w in AD2D_WEIGHTS {
        assimilators.push(AssimilatorConfig {
            b_policy: Some(BPolicy::Heteroscedastic { epsilon: 0.02 }),
            target_alpha: Some(w),
            ..AssimilatorConfig::new(format!("three_d_var_alpha_{w}"), Method::ThreeDVar)
        });
    }
    ExperimentConfig {
        name: "ad2d".into(),
        horizon: 0.5,
        interval: 1,
        replicates,
        base_seed: seed,
        output_dir: None,
        workers: None,
        members_dump_max_dim: 16,
        metrics: MetricOptions::default(),
        dynamics: DynamicsSpec::AdvectionDiffusion {
            truth: ad2d_params(0.08, 0.02),
            biased: ad2d_params(0.12, 0.01),
            sources: vec![source(1000.0, 25.0), source(4000.0, 35.0)],
            background_start: BackgroundStart::BiasedSources,
            initial_noise: relative(0.02),
            model_noise: relative(0.02),
            observation: ObservationSpec::Representativeness {
                sources: vec![source(800.0, 25.0), source(2400.0, 35.0)],
                block: 2,
                epsilon: 0.05,
            },
        },
        assimilators,
    }
}
