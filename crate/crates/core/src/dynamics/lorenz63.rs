use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz63Params {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
}

impl Lorenz63Params {
    /// The classic chaotic regime `(10, 28, 8/3)` with `dt = 0.01`.
    pub fn truth() -> Self {
        Self { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0, dt: 0.01 }
    }

    /// Perturbed parameters `(10.5, 27, 10/3)` used as the imperfect model.
    pub fn biased() -> Self {
        Self { sigma: 10.5, rho: 27.0, beta: 10.0 / 3.0, dt: 0.01 }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("{field}.dt"), "must be positive"));
        }
        for (name, v) in [("sigma", self.sigma), ("rho", self.rho), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{field}.{name}"), "must be finite"));
            }
        }
        Ok(())
    }

    pub fn derivative(&self, s: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            -self.sigma * (s.x - s.y),
            self.rho * s.x - s.y - s.x * s.z,
            s.x * s.y - self.beta * s.z,
        )
    }

    /// One of the two non-trivial equilibria, `(±√(β(ρ−1)), ±√(β(ρ−1)), ρ−1)`.
    pub fn fixed_point(&self, positive: bool) -> Vector3<f64> {
        let r = (self.beta * (self.rho - 1.0)).sqrt();
        let r = if positive { r } else { -r };
        Vector3::new(r, r, self.rho - 1.0)
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn lorenz63_step(state: &Vector3<f64>, p: &Lorenz63Params) -> Result<Vector3<f64>> {
    let next = rk4(state, p, p.dt);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Diverged(format!("Lorenz-63 state left the finite range from {state:?}")))
    }
}

pub(crate) fn rk4(s: &Vector3<f64>, p: &Lorenz63Params, h: f64) -> Vector3<f64> {
    let k1 = p.derivative(s);
    let k2 = p.derivative(&(s + k1 * (h / 2.0)));
    let k3 = p.derivative(&(s + k2 * (h / 2.0)));
    let k4 = p.derivative(&(s + k3 * h));
    s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibria_are_stationary() {
        let p = Lorenz63Params::truth();
        for positive in [true, false] {
            let fp = p.fixed_point(positive);
            let next = lorenz63_step(&fp, &p).unwrap();
            assert!((next - fp).amax() <= 1e-10);
        }
        assert_eq!(lorenz63_step(&Vector3::zeros(), &p).unwrap(), Vector3::zeros());
    }

    #[test]
    fn blow_up_is_reported() {
        let p = Lorenz63Params { dt: 1.0, ..Lorenz63Params::truth() };
        let mut s = Vector3::new(1e100, 1e100, 1e100);
        let mut failed = false;
        for _ in 0..10 {
            match lorenz63_step(&s, &p) {
                Ok(n) => s = n,
                Err(Error::Diverged(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(failed);
    }
}
