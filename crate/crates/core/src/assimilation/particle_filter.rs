use nalgebra::DVector;

use super::{AnalysisResult, CycleDiagnostics, MethodStreams};
use crate::distributions::{multinomial_resample, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_spd, Covariance};
use crate::ot::DiscreteDistribution;

/// Normalized Gaussian-likelihood weights `w_i ∝ exp(−½ (y−x_i)ᵀ R⁻¹ (y−x_i))`,
/// computed with the largest log-weight shifted to zero.
pub fn likelihood_weights(particles: &Ensemble, y: &DVector<f64>, r: &Covariance) -> Result<DVector<f64>> {
    if y.len() != particles.dim() || r.dim() != y.len() {
        return Err(Error::DimensionMismatch("observation, R and state differ in size".into()));
    }
    let log_w: Vec<f64> = match r {
        Covariance::Diagonal(d) => {
            if d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Singular("R must be positive definite".into()));
            }
            particles
                .members
                .column_iter()
                .map(|x| -0.5 * x.iter().zip(y.iter()).zip(d.iter()).map(|((a, b), v)| (b - a).powi(2) / v).sum::<f64>())
                .collect()
        }
        Covariance::Dense(m) => {
            let chol = cholesky_spd(m, "R")?;
            let l = chol.l();
            particles
                .members
                .column_iter()
                .map(|x| {
                    let d = y - x;
                    let z = l.solve_lower_triangular(&d).expect("Cholesky factor is non-singular");
                    -0.5 * z.norm_squared()
                })
                .collect()
        }
    };
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let w = DVector::from_iterator(log_w.len(), log_w.iter().map(|l| (l - max).exp()));
    let total = w.sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(w / total)
}

/// Sequential importance resampling: weight by the likelihood, then draw `M`
/// equally weighted particles by multinomial resampling.
pub fn particle_filter_analysis(
    particles: &Ensemble,
    y: &DVector<f64>,
    r: &Covariance,
    streams: &mut MethodStreams,
) -> Result<AnalysisResult> {
    let w = likelihood_weights(particles, y, r)?;
    let ess = 1.0 / w.norm_squared();
    let mean = &particles.members * &w;
    let posterior = DiscreteDistribution::new(particles.members.clone(), w)?;
    let mut ensemble = multinomial_resample(&posterior, particles.size(), &mut streams.resampling)?;
    ensemble.time = particles.time;
    Ok(AnalysisResult {
        ensemble,
        mean,
        histogram: Some(posterior),
        diagnostics: CycleDiagnostics {
            time: particles.time,
            effective_sample_size: Some(ess),
            ..Default::default()
        },
    })
}
