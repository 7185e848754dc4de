//! Bias and unbiased RMSE.
//!
//! For a component `d` observed over times `t`, with error `e = a − x`:
//! - bias: `|mean_t e_d|` (or `mean_t |e_d|` with [`BiasMode::MeanAbsolute`]);
//! - ubrmse: `sqrt(mean_t ((a_d − ā_d) − (x_d − x̄_d))²)`, bars being time
//!   means.
//!
//! The per-cycle ("spatial") statistics are the same formulas with the roles
//! of time and component swapped: means are taken over components at a fixed
//! time.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// Absolute value of the mean error.
    #[default]
    AbsoluteMean,
    /// Mean of the absolute error.
    MeanAbsolute,
}

/// Error statistics of one analysis series against the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSeries {
    /// Temporal statistics per state component.
    pub per_dimension_bias: Vec<f64>,
    pub per_dimension_ubrmse: Vec<f64>,
    /// Spatial statistics per analysis cycle.
    pub per_cycle_bias: Vec<f64>,
    pub per_cycle_ubrmse: Vec<f64>,
    /// Averages of the per-component temporal statistics.
    pub bias: f64,
    pub ubrmse: f64,
}

fn bias_of(errors: impl Iterator<Item = f64> + Clone, mode: BiasMode) -> f64 {
    let n = errors.clone().count() as f64;
    match mode {
        BiasMode::AbsoluteMean => (errors.sum::<f64>() / n).abs(),
        BiasMode::MeanAbsolute => errors.map(f64::abs).sum::<f64>() / n,
    }
}

fn ubrmse_of(errors: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = errors.clone().count() as f64;
    let mean = errors.clone().sum::<f64>() / n;
    (errors.map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Metrics of `analysis` against `truth`, both indexed by analysis cycle.
pub fn compute_metrics(analysis: &[DVector<f64>], truth: &[DVector<f64>], mode: BiasMode) -> Result<MetricSeries> {
    if analysis.len() != truth.len() || analysis.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} analysis states vs {} truth states",
            analysis.len(),
            truth.len()
        )));
    }
    let dim = truth[0].len();
    if analysis.iter().chain(truth).any(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch("states differ in dimension".into()));
    }
    // (a − ā) − (x − x̄) equals e − ē, so both statistics only need the error.
    let errors: Vec<DVector<f64>> = analysis.iter().zip(truth).map(|(a, x)| a - x).collect();
    let per_dimension_bias: Vec<f64> =
        (0..dim).map(|d| bias_of(errors.iter().map(move |e| e[d]), mode)).collect();
    let per_dimension_ubrmse: Vec<f64> = (0..dim).map(|d| ubrmse_of(errors.iter().map(move |e| e[d]))).collect();
    let per_cycle_bias = errors.iter().map(|e| bias_of(e.iter().copied(), mode)).collect();
    let per_cycle_ubrmse = errors.iter().map(|e| ubrmse_of(e.iter().copied())).collect();
    Ok(MetricSeries {
        bias: per_dimension_bias.iter().sum::<f64>() / dim as f64,
        ubrmse: per_dimension_ubrmse.iter().sum::<f64>() / dim as f64,
        per_dimension_bias,
        per_dimension_ubrmse,
        per_cycle_bias,
        per_cycle_ubrmse,
    })
}
