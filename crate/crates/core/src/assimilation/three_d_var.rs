use nalgebra::DVector;

use super::BPolicy;
use crate::dynamics::VARIANCE_FLOOR;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_spd, Covariance};

/// Minimizer of `‖x − x_b‖²_{B⁻¹} + ‖y − x‖²_{R⁻¹}` for identity `H`:
/// `x_a = (B⁻¹ + R⁻¹)⁻¹ (B⁻¹ x_b + R⁻¹ y)`.
///
/// Evaluated as `R (B+R)⁻¹ x_b + B (B+R)⁻¹ y` with one Cholesky
/// factorization of `B + R`, or componentwise when both are diagonal.
pub fn three_d_var_analysis(
    xb: &DVector<f64>,
    y: &DVector<f64>,
    b: &Covariance,
    r: &Covariance,
) -> Result<DVector<f64>> {
    check_dims(xb, y, b, r)?;
    match (b, r) {
        (Covariance::Diagonal(bd), Covariance::Diagonal(rd)) => {
            if bd.iter().chain(rd.iter()).any(|v| !(*v > 0.0)) {
                return Err(Error::Singular("B and R must be positive definite".into()));
            }
            Ok(DVector::from_fn(xb.len(), |i, _| (rd[i] * xb[i] + bd[i] * y[i]) / (bd[i] + rd[i])))
        }
        _ => {
            let bm = b.to_dense();
            let rm = r.to_dense();
            cholesky_spd(&bm, "B")?;
            cholesky_spd(&rm, "R")?;
            let s = cholesky_spd(&(&bm + &rm), "B + R")?;
            Ok(&rm * s.solve(xb) + &bm * s.solve(y))
        }
    }
}

/// The Kalman form `x_b + B (B + R)⁻¹ (y − x_b)` of the same update.
pub fn kalman_update(
    xb: &DVector<f64>,
    y: &DVector<f64>,
    b: &Covariance,
    r: &Covariance,
) -> Result<DVector<f64>> {
    check_dims(xb, y, b, r)?;
    let bm = b.to_dense();
    let s = cholesky_spd(&(&bm + r.to_dense()), "B + R")?;
    Ok(xb + bm * s.solve(&(y - xb)))
}

/// The `B` a 3D-Var run uses for forecast `xb`, optionally rescaled so that
/// `tr(R) / tr(R + B) = target_alpha`.
pub fn three_d_var_background(
    policy: &BPolicy,
    xb: &DVector<f64>,
    r: &Covariance,
    target_alpha: Option<f64>,
) -> Result<Covariance> {
    let n = xb.len();
    let mut b = match policy {
        BPolicy::Prescribed { variance } => match variance.len() {
            1 => Covariance::scaled_identity(n, variance[0]),
            len if len == n => Covariance::Diagonal(DVector::from_column_slice(variance)),
            len => {
                return Err(Error::DimensionMismatch(format!(
                    "prescribed B has {len} entries for a state of {n}"
                )))
            }
        },
        BPolicy::Heteroscedastic { epsilon } => {
            let mut var = xb.map(|v| epsilon * v * v);
            let floor = VARIANCE_FLOOR * var.max().max(f64::MIN_POSITIVE);
            var.apply(|v| *v = v.max(floor));
            Covariance::Diagonal(var)
        }
        BPolicy::ProportionalToR => r.clone(),
    };
    if let Some(alpha) = target_alpha {
        let scale = r.trace() * (1.0 - alpha) / (alpha * b.trace());
        b = b.scale(scale);
    }
    Ok(b)
}

fn check_dims(xb: &DVector<f64>, y: &DVector<f64>, b: &Covariance, r: &Covariance) -> Result<()> {
    let n = xb.len();
    if y.len() != n || b.dim() != n || r.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "x_b: {n}, y: {}, B: {}, R: {}",
            y.len(),
            b.dim(),
            r.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn equal_weights_average() {
        let b = Covariance::scaled_identity(2, 3.0);
        let xa = three_d_var_analysis(&v(&[0.0, 4.0]), &v(&[2.0, 0.0]), &b, &b).unwrap();
        assert_eq!(xa, v(&[1.0, 2.0]));
    }

    #[test]
    fn scalar_hand_computation() {
        let xa = three_d_var_analysis(
            &v(&[0.0]),
            &v(&[5.0]),
            &Covariance::Dense(DMatrix::from_element(1, 1, 4.0)),
            &Covariance::Dense(DMatrix::from_element(1, 1, 1.0)),
        )
        .unwrap();
        assert!((xa[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn tiny_r_pulls_to_the_observation() {
        let xa = three_d_var_analysis(
            &v(&[0.0, 1.0]),
            &v(&[3.0, -1.0]),
            &Covariance::scaled_identity(2, 1.0),
            &Covariance::scaled_identity(2, 1e-12),
        )
        .unwrap();
        assert!((xa - v(&[3.0, -1.0])).amax() < 1e-10);
    }

    #[test]
    fn proportional_b_blends_linearly() {
        let r = Covariance::Diagonal(v(&[0.5, 8.0, 2.0]));
        let (xb, y) = (v(&[1.0, 2.0, 3.0]), v(&[5.0, -2.0, 0.0]));
        let b = three_d_var_background(&BPolicy::ProportionalToR, &xb, &r, Some(0.25)).unwrap();
        let xa = three_d_var_analysis(&xb, &y, &b, &r).unwrap();
        assert!((xa - (&xb * 0.25 + &y * 0.75)).amax() < 1e-12);
    }

    #[test]
    fn singular_inputs_are_rejected() {
        let zero = Covariance::Dense(DMatrix::zeros(1, 1));
        let one = Covariance::scaled_identity(1, 1.0);
        assert!(matches!(three_d_var_analysis(&v(&[0.0]), &v(&[1.0]), &zero, &one), Err(Error::Singular(_))));
        assert!(matches!(
            three_d_var_analysis(&v(&[0.0]), &v(&[1.0]), &one, &Covariance::Diagonal(v(&[0.0]))),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn target_alpha_rescales_b() {
        let r = Covariance::Diagonal(v(&[1.0, 3.0]));
        let b = three_d_var_background(&BPolicy::Heteroscedastic { epsilon: 0.02 }, &v(&[5.0, 10.0]), &r, Some(0.25))
            .unwrap();
        let alpha = r.trace() / (r.trace() + b.trace());
        assert!((alpha - 0.25).abs() < 1e-12);
    }
}
