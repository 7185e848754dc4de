use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;

use super::{
    enkf_analysis, enrda_analysis, particle_filter_analysis, three_d_var_analysis,
    three_d_var_background, AnalysisResult, AssimilatorConfig, CycleDiagnostics, Method,
};
use crate::distributions::Ensemble;
use crate::dynamics::{apply_model_noise, Model, ModelNoiseSpec, Observation};
use crate::error::{Error, Result};
use crate::linalg::Covariance;
use crate::rng::{method_stream, StreamRng, StreamRole};

/// The random streams one assimilator owns within one replicate.
#[derive(Debug, Clone)]
pub struct MethodStreams {
    pub model_noise: StreamRng,
    /// Observation perturbations (EnRDA's observation cloud, EnKF's `v_i`).
    pub perturbation: StreamRng,
    pub resampling: StreamRng,
}

impl MethodStreams {
    pub fn for_method(base_seed: u64, replicate: u64, label: &str) -> Self {
        Self {
            model_noise: method_stream(base_seed, replicate, StreamRole::ModelNoise, label),
            perturbation: method_stream(base_seed, replicate, StreamRole::ObservationNoise, label),
            resampling: method_stream(base_seed, replicate, StreamRole::Resampling, label),
        }
    }

    /// Independent streams derived from one seed, for tests and examples.
    pub fn from_seed(seed: u64) -> Self {
        Self {
            model_noise: StreamRng::seed_from_u64(seed),
            perturbation: StreamRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
            resampling: StreamRng::seed_from_u64(seed ^ 0xc2b2_ae3d_27d4_eb4f),
        }
    }
}

/// What a method carries from one analysis to the next forecast.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastState {
    Ensemble(Ensemble),
    /// A single deterministic state (3D-Var).
    Single { state: DVector<f64>, time: f64 },
}

impl ForecastState {
    pub fn from_analysis(result: &AnalysisResult, method: Method) -> Self {
        if method.is_ensemble() {
            ForecastState::Ensemble(result.ensemble.clone())
        } else {
            ForecastState::Single { state: result.mean.clone(), time: result.ensemble.time }
        }
    }
}

/// Propagates `state` for `steps` model steps with the forecast model (plus
/// model noise after every step for ensembles) and assimilates `obs`.
pub fn run_assimilation_cycle(
    state: &ForecastState,
    model: &Model,
    noise: &ModelNoiseSpec,
    steps: usize,
    obs: &Observation,
    cfg: &AssimilatorConfig,
    streams: &mut MethodStreams,
) -> Result<AnalysisResult> {
    match (state, cfg.method) {
        (ForecastState::Ensemble(e), method) if method.is_ensemble() => {
            let mut members: DMatrix<f64> = e.members.clone();
            for _ in 0..steps {
                model.step_columns(&mut members)?;
                apply_model_noise(members.as_mut_slice(), noise, &mut streams.model_noise);
            }
            if members.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged(format!("{} forecast became non-finite", cfg.label)));
            }
            let background = Ensemble::new(members, obs.time)?;
            match method {
                Method::Enrda => enrda_analysis(&background, &obs.y, &obs.r, cfg, streams),
                Method::Enkf => enkf_analysis(&background, &obs.y, &obs.r, streams),
                Method::ParticleFilter => particle_filter_analysis(&background, &obs.y, &obs.r, streams),
                Method::ThreeDVar => unreachable!(),
            }
        }
        (ForecastState::Single { state, .. }, Method::ThreeDVar) => {
            let mut xb = state.clone();
            for _ in 0..steps {
                model.step(xb.as_mut_slice())?;
            }
            let policy = cfg
                .b_policy
                .as_ref()
                .ok_or_else(|| Error::invalid("b_policy", "3D-Var needs a background covariance"))?;
            let b = three_d_var_background(policy, &xb, &obs.r, cfg.target_alpha)?;
            let xa = three_d_var_analysis(&xb, &obs.y, &b, &obs.r)?;
            let tr_r = obs.r.trace();
            let gain_norm = match (&b, &obs.r) {
                (Covariance::Diagonal(bd), Covariance::Diagonal(rd)) => {
                    bd.iter().zip(rd.iter()).map(|(b, r)| (b / (b + r)).powi(2)).sum::<f64>().sqrt()
                }
                _ => f64::NAN,
            };
            Ok(AnalysisResult {
                ensemble: Ensemble::new(DMatrix::from_column_slice(xa.len(), 1, xa.as_slice()), obs.time)?,
                mean: xa,
                histogram: None,
                diagnostics: CycleDiagnostics {
                    time: obs.time,
                    alpha: Some(tr_r / (tr_r + b.trace())),
                    gain_norm: gain_norm.is_finite().then_some(gain_norm),
                    ..Default::default()
                },
            })
        }
        _ => Err(Error::invalid(
            "method",
            format!("{} cannot continue from this forecast state", cfg.method.name()),
        )),
    }
}
