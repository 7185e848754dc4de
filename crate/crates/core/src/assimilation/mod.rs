//! The four analysis schemes behind one interface, plus the forecast/analysis
//! cycle that drives them.
//!
//! All schemes assume an identity observation operator.

mod cycle;
mod enkf;
mod enrda;
mod particle_filter;
mod three_d_var;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use cycle::{run_assimilation_cycle, ForecastState, MethodStreams};
pub use enkf::enkf_analysis;
pub use enrda::{enrda_analysis, HISTOGRAM_ATOM_LIMIT};
pub use particle_filter::{likelihood_weights, particle_filter_analysis};
pub use three_d_var::{kalman_update, three_d_var_analysis, three_d_var_background};

use crate::distributions::Ensemble;
use crate::error::{Error, Result};
use crate::ot::{DiscreteDistribution, SinkhornOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enrda,
    ThreeDVar,
    Enkf,
    ParticleFilter,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Enrda => "enrda",
            Method::ThreeDVar => "three_d_var",
            Method::Enkf => "enkf",
            Method::ParticleFilter => "particle_filter",
        }
    }

    pub fn is_ensemble(self) -> bool {
        !matches!(self, Method::ThreeDVar)
    }
}

/// Displacement parameter: the weight of the background in the barycenter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaPolicy {
    Fixed { value: f64 },
    /// `η = tr(R) / tr(R + B)` with `B` the forecast-ensemble covariance,
    /// recomputed every cycle.
    TraceRatio,
}

/// Entropic regularization of the analysis coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaPolicy {
    Fixed { value: f64 },
    /// `γ = fraction · median(c_ij)`, recomputed every cycle.
    MedianFraction { fraction: f64 },
}

/// Background-error covariance used by 3D-Var.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BPolicy {
    /// Fixed diagonal; a single entry is broadcast to every component.
    Prescribed { variance: Vec<f64> },
    /// `diag(epsilon · x_b²)` from the current forecast.
    Heteroscedastic { epsilon: f64 },
    /// A multiple of the cycle's `R`, so every component gets the same
    /// background weight (`target_alpha`, or 1/2 without it).
    ProportionalToR,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

/// One assimilator of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssimilatorConfig {
    /// Unique name; used in outputs and to key the method's random streams.
    pub label: String,
    pub method: Method,
    #[serde(default = "default_eta")]
    pub eta: EtaPolicy,
    #[serde(default = "default_gamma")]
    pub gamma: GammaPolicy,
    /// Ensemble size `M` (ignored by 3D-Var).
    #[serde(default = "default_members")]
    pub ensemble_size: usize,
    /// Number `N` of perturbed observations; defaults to `M`.
    #[serde(default)]
    pub observation_members: Option<usize>,
    #[serde(default)]
    pub b_policy: Option<BPolicy>,
    /// Rescale 3D-Var's `B` every cycle so that `tr(R)/tr(R + B)` equals this.
    #[serde(default)]
    pub target_alpha: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub sinkhorn_tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub sinkhorn_max_iterations: usize,
}

fn default_eta() -> EtaPolicy {
    EtaPolicy::TraceRatio
}

fn default_gamma() -> GammaPolicy {
    GammaPolicy::MedianFraction { fraction: 0.05 }
}

fn default_members() -> usize {
    100
}

impl AssimilatorConfig {
    /// Defaults for `method` with the given label.
    pub fn new(label: impl Into<String>, method: Method) -> Self {
        Self {
            label: label.into(),
            method,
            eta: default_eta(),
            gamma: default_gamma(),
            ensemble_size: default_members(),
            observation_members: None,
            b_policy: None,
            target_alpha: None,
            sinkhorn_tolerance: DEFAULT_TOLERANCE,
            sinkhorn_max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn observation_members(&self) -> usize {
        self.observation_members.unwrap_or(self.ensemble_size)
    }

    pub fn sinkhorn_options(&self) -> SinkhornOptions {
        SinkhornOptions { tolerance: self.sinkhorn_tolerance, max_iterations: self.sinkhorn_max_iterations }
    }

    /// Checks every field; errors name the offending field as
    /// `<prefix>.<field>`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let f = |name: &str| format!("{prefix}.{name}");
        if self.label.is_empty() || self.label.contains(['/', ',', '"', '\n']) {
            return Err(Error::invalid(f("label"), "must be non-empty without '/', ',', quotes or newlines"));
        }
        if let EtaPolicy::Fixed { value } = self.eta {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(f("eta.value"), format!("must lie in [0, 1], got {value}")));
            }
        }
        match self.gamma {
            GammaPolicy::Fixed { value } if !(value > 0.0 && value.is_finite()) => {
                return Err(Error::invalid(f("gamma.value"), "must be positive"));
            }
            GammaPolicy::MedianFraction { fraction } if !(fraction > 0.0 && fraction.is_finite()) => {
                return Err(Error::invalid(f("gamma.fraction"), "must be positive"));
            }
            _ => {}
        }
        if self.method.is_ensemble() {
            let min = if self.method == Method::Enkf { 2 } else { 1 };
            if self.ensemble_size < min {
                return Err(Error::invalid(f("ensemble_size"), format!("must be >= {min}")));
            }
        }
        if self.observation_members == Some(0) {
            return Err(Error::invalid(f("observation_members"), "must be >= 1"));
        }
        if self.method == Method::ThreeDVar {
            match &self.b_policy {
                None => return Err(Error::invalid(f("b_policy"), "3D-Var needs a background covariance")),
                Some(BPolicy::Prescribed { variance }) => {
                    if variance.is_empty() || variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(Error::invalid(f("b_policy.variance"), "entries must be positive"));
                    }
                }
                Some(BPolicy::Heteroscedastic { epsilon }) => {
                    if !(*epsilon > 0.0 && epsilon.is_finite()) {
                        return Err(Error::invalid(f("b_policy.epsilon"), "must be positive"));
                    }
                }
                Some(BPolicy::ProportionalToR) => {}
            }
        }
        if let Some(alpha) = self.target_alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::invalid(f("target_alpha"), "must lie in (0, 1)"));
            }
        }
        if !(self.sinkhorn_tolerance > 0.0) {
            return Err(Error::invalid(f("sinkhorn_tolerance"), "must be positive"));
        }
        if self.sinkhorn_max_iterations == 0 {
            return Err(Error::invalid(f("sinkhorn_max_iterations"), "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-cycle record of what an analysis did. Fields that do not apply to a
/// method are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CycleDiagnostics {
    pub time: f64,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub transport_cost: Option<f64>,
    pub sinkhorn_iterations: Option<usize>,
    pub marginal_residual: Option<f64>,
    pub log_domain: Option<bool>,
    pub effective_sample_size: Option<f64>,
    /// Frobenius norm of the gain `B (B + R)⁻¹`.
    pub gain_norm: Option<f64>,
    /// `tr(R) / tr(R + B)` for the covariances the method used.
    pub alpha: Option<f64>,
}

/// Outcome of one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisResult {
    /// Analysis members (a single column for 3D-Var).
    pub ensemble: Ensemble,
    /// Mean of the analysis distribution before any resampling.
    pub mean: DVector<f64>,
    /// The analysis histogram before resampling, kept when small enough.
    pub histogram: Option<DiscreteDistribution>,
    pub diagnostics: CycleDiagnostics,
}
