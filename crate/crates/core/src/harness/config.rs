use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::BiasMode;
use crate::assimilation::{AssimilatorConfig, Method};
use crate::dynamics::{steps_in, DynamicsSpec};
use crate::error::{Error, Result};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "ENRDA_OUTPUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOptions {
    #[serde(default)]
    pub bias_mode: BiasMode,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_members_dump() -> usize {
    16
}

/// A complete twin experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Final model time; must be a whole number of model steps.
    pub horizon: f64,
    /// Model steps between analyses.
    pub interval: usize,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for replicates; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Member-level CSVs are written only for states of at most this dimension.
    #[serde(default = "default_members_dump")]
    pub members_dump_max_dim: usize,
    #[serde(default)]
    pub metrics: MetricOptions,
    pub dynamics: DynamicsSpec,
    pub assimilators: Vec<AssimilatorConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Model steps in the horizon.
    pub fn total_steps(&self) -> Result<usize> {
        steps_in(self.horizon, self.dynamics.dt())
    }

    /// Number of analyses: one every `interval` steps, the first after one
    /// interval of forecast.
    pub fn cycles(&self) -> Result<usize> {
        Ok(self.total_steps()? / self.interval)
    }

    /// Output directory: the environment override, else the configured path,
    /// else `./output/<name>`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("output").join(&self.name))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be >= 1"));
        }
        if self.interval == 0 {
            return Err(Error::invalid("interval", "must be >= 1"));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be a finite value >= 0"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        self.dynamics.validate()?;
        if self.cycles()? == 0 {
            return Err(Error::invalid("horizon", "shorter than one assimilation interval"));
        }
        if self.assimilators.is_empty() {
            return Err(Error::invalid("assimilators", "needs at least one entry"));
        }
        let mut labels = HashSet::new();
        for (k, a) in self.assimilators.iter().enumerate() {
            let prefix = format!("assimilators[{k}]");
            a.validate(&prefix)?;
            if !labels.insert(a.label.as_str()) {
                return Err(Error::invalid(format!("{prefix}.label"), format!("duplicate label '{}'", a.label)));
            }
            if a.method == Method::Enkf && self.dynamics.state_dim() > 4096 {
                return Err(Error::invalid(
                    format!("{prefix}.method"),
                    "EnKF forms a dense state covariance; state is too large",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::{ad1d, lorenz63};

    #[test]
    fn toml_round_trip() {
        for cfg in [lorenz63(3, 11), ad1d(2, 5)] {
            let text = cfg.to_toml_string().unwrap();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml_string().unwrap(), text);
        }
    }

    #[test]
    fn eta_outside_unit_interval_names_the_field() {
        let text = lorenz63(1, 1).to_toml_string().unwrap();
        let text = text.replacen("kind = \"trace_ratio\"", "kind = \"fixed\"\nvalue = 1.5", 1);
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("assimilators[0].eta.value"), "{err}");
    }

    #[test]
    fn lorenz_preset_has_fifty_cycles() {
        assert_eq!(lorenz63(1, 0).cycles().unwrap(), 50);
        assert_eq!(ad1d(1, 0).cycles().unwrap(), 6);
    }
}
