use nalgebra::DVector;

use super::{AnalysisResult, CycleDiagnostics, MethodStreams};
use crate::distributions::{estimate_covariance, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_spd, Covariance};

/// Perturbed-observation (stochastic) EnKF analysis with identity `H`:
/// `x_i ← x_i + K (y + v_i − x_i)`, `K = B (B + R)⁻¹`, `v_i ~ N(0, R)`, with
/// `B` the forecast-ensemble covariance.
pub fn enkf_analysis(
    background: &Ensemble,
    y: &DVector<f64>,
    r: &Covariance,
    streams: &mut MethodStreams,
) -> Result<AnalysisResult> {
    if y.len() != background.dim() || r.dim() != y.len() {
        return Err(Error::DimensionMismatch("observation, R and state differ in size".into()));
    }
    let est = estimate_covariance(background)?;
    let b = est.matrix;
    let s = cholesky_spd(&(&b + r.to_dense()), "B + R (add jitter to R)")?;
    let factor = r.factor()?;
    let mut innovations = background.members.clone();
    for (k, mut col) in innovations.column_iter_mut().enumerate() {
        let v = factor.sample(&mut streams.perturbation);
        let x = background.members.column(k);
        col.copy_from(&(y + v - x));
    }
    let increments = &b * s.solve(&innovations);
    let members = &background.members + increments;
    let gain = &b * s.inverse();
    let tr_r = r.trace();
    let alpha = tr_r / (tr_r + b.trace());
    let ensemble = Ensemble::new(members, background.time)?;
    Ok(AnalysisResult {
        mean: ensemble.mean(),
        ensemble,
        histogram: None,
        diagnostics: CycleDiagnostics {
            time: background.time,
            gain_norm: Some(gain.norm()),
            alpha: Some(alpha),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identical_members_are_left_alone() {
        let bg = Ensemble::replicated(&DVector::from_vec(vec![1.0, 2.0]), 5, 0.0).unwrap();
        let out = enkf_analysis(
            &bg,
            &DVector::from_vec(vec![4.0, 4.0]),
            &Covariance::scaled_identity(2, 1.0),
            &mut MethodStreams::from_seed(1),
        )
        .unwrap();
        assert!((out.ensemble.members - bg.members).amax() < 1e-14);
        assert_eq!(out.diagnostics.gain_norm, Some(0.0));
    }

    #[test]
    fn huge_r_gives_almost_no_update() {
        let bg = Ensemble::new(DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]), 0.0).unwrap();
        let out = enkf_analysis(
            &bg,
            &DVector::from_vec(vec![5.0]),
            &Covariance::scaled_identity(1, 1e8),
            &mut MethodStreams::from_seed(1),
        )
        .unwrap();
        assert!((out.ensemble.members - bg.members).amax() < 1e-2);
    }

    #[test]
    fn scalar_gain() {
        // Members -2 and 2 give B = 8, so with R = 2 the gain is 0.8.
        let bg = Ensemble::new(DMatrix::from_row_slice(1, 2, &[-2.0, 2.0]), 0.0).unwrap();
        let out = enkf_analysis(
            &bg,
            &DVector::from_vec(vec![5.0]),
            &Covariance::scaled_identity(1, 2.0),
            &mut MethodStreams::from_seed(4),
        )
        .unwrap();
        assert!((out.diagnostics.gain_norm.unwrap() - 0.8).abs() < 1e-14);
    }
}
