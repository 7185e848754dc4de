use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `N(0, level · x²)` independently per component.
    HeteroscedasticRelative,
    /// `N(0, level · I)`.
    HomoscedasticIsotropic,
}

/// Additive Gaussian model error injected after every model step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelNoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
}

impl ModelNoiseSpec {
    pub fn none() -> Self {
        Self { kind: NoiseKind::HomoscedasticIsotropic, level: 0.0 }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::invalid(format!("{field}.level"), "must be a finite value >= 0"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.level == 0.0
    }
}

/// Adds one draw of model error to every component of `state` in place.
///
/// `state` may be a single vector, a grid field's values, or all members of an
/// ensemble laid out contiguously; the noise is independent per component.
pub fn apply_model_noise<R: Rng + ?Sized>(state: &mut [f64], spec: &ModelNoiseSpec, rng: &mut R) {
    if spec.is_zero() {
        return;
    }
    match spec.kind {
        NoiseKind::HomoscedasticIsotropic => {
            let sd = spec.level.sqrt();
            for v in state.iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        NoiseKind::HeteroscedasticRelative => {
            let rel = spec.level.sqrt();
            for v in state.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += rel * v.abs() * z;
            }
        }
    }
}
