//! Forward models, model error, truth trajectories and synthetic observations.

mod advection_diffusion;
mod lorenz63;
mod noise;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use advection_diffusion::{
    advect_diffuse_step, box_average, green_function_field, AdvectionDiffusionParams, GridField,
    PointSource, SpectralPropagator,
};
pub use lorenz63::{lorenz63_step, Lorenz63Params};
pub use noise::{apply_model_noise, ModelNoiseSpec, NoiseKind};

use crate::distributions::Ensemble;
use crate::error::{Error, Result};
use crate::linalg::{toeplitz, Covariance};

/// Relative floor applied to heteroscedastic error variances handed to the
/// assimilators, so that a vanishing state does not produce a singular
/// covariance. Noise generation itself uses the unfloored variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// How observations are produced from the truth (identity observation
/// operator throughout).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationSpec {
    /// `y = x + v`, `v_i ~ N(0, epsilon · x_i²)`.
    Heteroscedastic { epsilon: f64 },
    /// `y = x + v`, `v ~ N(0, variance · T)` with `T` the symmetric Toeplitz
    /// correlation matrix whose off-diagonals are `bands`.
    CorrelatedGaussian { variance: f64, bands: Vec<f64> },
    /// A lower-mass twin of the truth, sensed at `block`-times coarser
    /// resolution, plus heteroscedastic noise.
    Representativeness { sources: Vec<PointSource>, block: usize, epsilon: f64 },
}

impl ObservationSpec {
    fn validate(&self, field: &str, ndim_grid: Option<usize>) -> Result<()> {
        match self {
            ObservationSpec::Heteroscedastic { epsilon } => non_negative(&format!("{field}.epsilon"), *epsilon),
            ObservationSpec::CorrelatedGaussian { variance, bands } => {
                non_negative(&format!("{field}.variance"), *variance)?;
                if bands.first() != Some(&1.0) {
                    return Err(Error::invalid(format!("{field}.bands"), "must start with 1 on the diagonal"));
                }
                Ok(())
            }
            ObservationSpec::Representativeness { sources, block, epsilon } => {
                non_negative(&format!("{field}.epsilon"), *epsilon)?;
                if ndim_grid.is_none() {
                    return Err(Error::invalid(
                        format!("{field}.kind"),
                        "representativeness observations need a gridded model",
                    ));
                }
                if *block == 0 {
                    return Err(Error::invalid(format!("{field}.block"), "must be >= 1"));
                }
                validate_sources(&format!("{field}.sources"), sources)
            }
        }
    }
}

/// Starting point of the background (and of the 3D-Var state) for gridded
/// models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundStart {
    /// The true initial state.
    #[default]
    Truth,
    /// The initial sources evolved for their ages with the biased parameters.
    BiasedSources,
}

/// A forward model with its truth and biased parameterizations, its error
/// model, and the observation process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    Lorenz63 {
        truth: Lorenz63Params,
        biased: Lorenz63Params,
        initial_state: Vec<f64>,
        /// Perturbation of the initial ensemble around the true initial state.
        initial_noise: ModelNoiseSpec,
        model_noise: ModelNoiseSpec,
        observation: ObservationSpec,
    },
    AdvectionDiffusion {
        truth: AdvectionDiffusionParams,
        biased: AdvectionDiffusionParams,
        /// Point masses whose evolved superposition is the initial truth.
        sources: Vec<PointSource>,
        #[serde(default)]
        background_start: BackgroundStart,
        initial_noise: ModelNoiseSpec,
        model_noise: ModelNoiseSpec,
        observation: ObservationSpec,
    },
}

impl DynamicsSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DynamicsSpec::Lorenz63 { truth, biased, initial_state, initial_noise, model_noise, observation } => {
                truth.validate("dynamics.truth")?;
                biased.validate("dynamics.biased")?;
                if truth.dt != biased.dt {
                    return Err(Error::invalid("dynamics.biased.dt", "must equal the truth step"));
                }
                if initial_state.len() != 3 || initial_state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("dynamics.initial_state", "needs three finite values"));
                }
                initial_noise.validate("dynamics.initial_noise")?;
                model_noise.validate("dynamics.model_noise")?;
                observation.validate("dynamics.observation", None)?;
                if let ObservationSpec::CorrelatedGaussian { bands, .. } = observation {
                    if bands.len() > 3 {
                        return Err(Error::invalid("dynamics.observation.bands", "at most 3 bands for a 3-D state"));
                    }
                }
                Ok(())
            }
            DynamicsSpec::AdvectionDiffusion {
                truth, biased, sources, initial_noise, model_noise, observation, ..
            } => {
                truth.validate("dynamics.truth")?;
                biased.validate("dynamics.biased")?;
                if truth.spacing != biased.spacing || truth.extent != biased.extent || truth.dt != biased.dt {
                    return Err(Error::invalid("dynamics.biased", "grid and dt must match the truth"));
                }
                validate_sources("dynamics.sources", sources)?;
                initial_noise.validate("dynamics.initial_noise")?;
                model_noise.validate("dynamics.model_noise")?;
                observation.validate("dynamics.observation", Some(truth.ndim()))
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            DynamicsSpec::Lorenz63 { .. } => 3,
            DynamicsSpec::AdvectionDiffusion { truth, .. } => truth.len(),
        }
    }

    /// Grid shape for gridded models.
    pub fn grid_shape(&self) -> Option<Vec<usize>> {
        match self {
            DynamicsSpec::Lorenz63 { .. } => None,
            DynamicsSpec::AdvectionDiffusion { truth, .. } => Some(truth.shape()),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            DynamicsSpec::Lorenz63 { truth, .. } => truth.dt,
            DynamicsSpec::AdvectionDiffusion { truth, .. } => truth.dt,
        }
    }

    pub fn model_noise(&self) -> &ModelNoiseSpec {
        match self {
            DynamicsSpec::Lorenz63 { model_noise, .. } | DynamicsSpec::AdvectionDiffusion { model_noise, .. } => {
                model_noise
            }
        }
    }

    pub fn initial_noise(&self) -> &ModelNoiseSpec {
        match self {
            DynamicsSpec::Lorenz63 { initial_noise, .. }
            | DynamicsSpec::AdvectionDiffusion { initial_noise, .. } => initial_noise,
        }
    }

    pub fn truth_model(&self) -> Result<Model> {
        match self {
            DynamicsSpec::Lorenz63 { truth, .. } => Ok(Model::Lorenz63(*truth)),
            DynamicsSpec::AdvectionDiffusion { truth, .. } => {
                Ok(Model::AdvectionDiffusion(Arc::new(SpectralPropagator::new(truth)?)))
            }
        }
    }

    /// The imperfect model used by every assimilator's forecast.
    pub fn forecast_model(&self) -> Result<Model> {
        match self {
            DynamicsSpec::Lorenz63 { biased, .. } => Ok(Model::Lorenz63(*biased)),
            DynamicsSpec::AdvectionDiffusion { biased, .. } => {
                Ok(Model::AdvectionDiffusion(Arc::new(SpectralPropagator::new(biased)?)))
            }
        }
    }

    pub fn initial_truth(&self) -> Result<DVector<f64>> {
        match self {
            DynamicsSpec::Lorenz63 { initial_state, .. } => Ok(DVector::from_column_slice(initial_state)),
            DynamicsSpec::AdvectionDiffusion { truth, sources, .. } => {
                Ok(DVector::from_vec(green_function_field(sources, 0.0, truth)?.values))
            }
        }
    }

    /// Deterministic starting background state (ensemble centre, 3D-Var start).
    pub fn initial_background(&self) -> Result<DVector<f64>> {
        match self {
            DynamicsSpec::AdvectionDiffusion {
                biased, sources, background_start: BackgroundStart::BiasedSources, ..
            } => Ok(DVector::from_vec(green_function_field(sources, 0.0, biased)?.values)),
            _ => self.initial_truth(),
        }
    }

    /// `size` members: the initial background perturbed by `initial_noise`.
    pub fn initial_ensemble<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Ensemble> {
        let centre = self.initial_background()?;
        let mut e = Ensemble::replicated(&centre, size, 0.0)?;
        apply_model_noise(e.members.as_mut_slice(), self.initial_noise(), rng);
        Ok(e)
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be a finite value >= 0"))
    }
}

fn validate_sources(field: &str, sources: &[PointSource]) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::invalid(field, "needs at least one source"));
    }
    for (k, s) in sources.iter().enumerate() {
        if !(s.mass >= 0.0 && s.mass.is_finite()) || !(s.age >= 0.0 && s.age.is_finite()) {
            return Err(Error::invalid(format!("{field}[{k}]"), "mass and age must be >= 0"));
        }
    }
    Ok(())
}

/// A steppable forward model.
#[derive(Debug, Clone)]
pub enum Model {
    Lorenz63(Lorenz63Params),
    AdvectionDiffusion(Arc<SpectralPropagator>),
}

impl Model {
    /// Advances one state in place by one model step.
    pub fn step(&self, state: &mut [f64]) -> Result<()> {
        match self {
            Model::Lorenz63(p) => {
                let s = Vector3::new(state[0], state[1], state[2]);
                let next = lorenz63_step(&s, p)?;
                state.copy_from_slice(next.as_slice());
                Ok(())
            }
            Model::AdvectionDiffusion(prop) => {
                prop.step(state);
                Ok(())
            }
        }
    }

    /// Advances every column of `members` by one step.
    pub fn step_columns(&self, members: &mut DMatrix<f64>) -> Result<()> {
        let m = members.nrows();
        for col in members.as_mut_slice().chunks_mut(m) {
            self.step(col)?;
        }
        Ok(())
    }
}

/// States at every model step from `t = 0` to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn at(&self, step: usize) -> &DVector<f64> {
        &self.states[step]
    }
}

/// Number of whole model steps in `horizon`.
pub fn steps_in(horizon: f64, dt: f64) -> Result<usize> {
    let n = horizon / dt;
    if !(n >= 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::invalid("horizon", format!("{horizon} is not a whole number of steps of {dt}")));
    }
    Ok(n.round() as usize)
}

/// Noise-free integration of the truth parameters over `[0, horizon]`.
pub fn make_truth_trajectory(spec: &DynamicsSpec, horizon: f64) -> Result<Trajectory> {
    spec.validate()?;
    let steps = steps_in(horizon, spec.dt())?;
    let model = spec.truth_model()?;
    let mut state = spec.initial_truth()?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(state.clone());
    for _ in 0..steps {
        model.step(state.as_mut_slice())?;
        states.push(state.clone());
    }
    Ok(Trajectory { dt: spec.dt(), states })
}

/// One observation vector and the error covariance the assimilators use for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub y: DVector<f64>,
    pub r: Covariance,
}

/// Draws the observation of `truth` at `time`.
///
/// For heteroscedastic errors the noise variance is `epsilon · x²` of the
/// sensed state while the reported `R` is `epsilon · y²` (what an observer can
/// compute), floored at `VARIANCE_FLOOR` times its largest entry.
pub fn synthesize_observation<R: Rng + ?Sized>(
    spec: &DynamicsSpec,
    truth: &DVector<f64>,
    time: f64,
    rng: &mut R,
) -> Result<Observation> {
    let observation = match spec {
        DynamicsSpec::Lorenz63 { observation, .. } | DynamicsSpec::AdvectionDiffusion { observation, .. } => {
            observation
        }
    };
    match observation {
        ObservationSpec::Heteroscedastic { epsilon } => Ok(heteroscedastic(truth, *epsilon, time, rng)),
        ObservationSpec::CorrelatedGaussian { variance, bands } => {
            let r = toeplitz(truth.len(), bands) * *variance;
            let cov = Covariance::Dense(r);
            let noise = cov.factor()?.sample(rng);
            Ok(Observation { time, y: truth + noise, r: cov })
        }
        ObservationSpec::Representativeness { sources, block, epsilon } => {
            let DynamicsSpec::AdvectionDiffusion { truth: params, .. } = spec else {
                return Err(Error::invalid("dynamics.observation.kind", "needs a gridded model"));
            };
            let twin = green_function_field(sources, time, params)?;
            let sensed = DVector::from_vec(box_average(&twin, *block).values);
            Ok(heteroscedastic(&sensed, *epsilon, time, rng))
        }
    }
}

fn heteroscedastic<R: Rng + ?Sized>(x: &DVector<f64>, epsilon: f64, time: f64, rng: &mut R) -> Observation {
    let sd = epsilon.sqrt();
    let y = x.map(|v| v + sd * v.abs() * rng.sample::<f64, _>(StandardNormal));
    let mut var = y.map(|v| epsilon * v * v);
    let floor = VARIANCE_FLOOR * var.max().max(f64::MIN_POSITIVE);
    var.apply(|v| *v = v.max(floor));
    Observation { time, y, r: Covariance::Diagonal(var) }
}
