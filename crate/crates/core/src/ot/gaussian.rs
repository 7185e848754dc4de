use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{sym_inv_sqrt, sym_sqrt, symmetrize, SYMMETRY_TOLERANCE};

/// Mean and covariance of a Gaussian on R^m.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if covariance.nrows() != m || covariance.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {m} but covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotPositiveSemidefinite("covariance is not symmetric".into()));
        }
        let min = covariance.clone().symmetric_eigenvalues().min();
        if min < -1e-12 * scale {
            return Err(Error::NotPositiveSemidefinite(format!("eigenvalue {min:e}")));
        }
        Ok(Self { mean, covariance })
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Point at parameter `eta` on the 2-Wasserstein geodesic between `a`
/// (`eta = 1`) and `b` (`eta = 0`):
///
/// `μ = η μ_a + (1−η) μ_b`,
/// `Σ = Σ_a^{-1/2} (η Σ_a + (1−η)(Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2})² Σ_a^{-1/2}`.
pub fn gaussian_w2_interpolate(a: &GaussianMoments, b: &GaussianMoments, eta: f64) -> Result<GaussianMoments> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", format!("must lie in [0, 1], got {eta}")));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("Gaussians of different dimension".into()));
    }
    let a_half = sym_sqrt(&a.covariance);
    let a_inv_half = sym_inv_sqrt(&a.covariance, "source covariance (add jitter)")?;
    if eta == 1.0 {
        return Ok(a.clone());
    }
    if eta == 0.0 {
        return Ok(b.clone());
    }
    let cross = sym_sqrt(&symmetrize(&(&a_half * &b.covariance * &a_half)));
    let inner = &a.covariance * eta + cross * (1.0 - eta);
    let cov = symmetrize(&(&a_inv_half * &inner * &inner * &a_inv_half));
    let mean = &a.mean * eta + &b.mean * (1.0 - eta);
    Ok(GaussianMoments { mean, covariance: cov })
}

/// Closed-form `d²_W` between Gaussians (Bures–Wasserstein).
pub fn gaussian_w2_distance_squared(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("Gaussians of different dimension".into()));
    }
    let a_half = sym_sqrt(&a.covariance);
    let cross = sym_sqrt(&symmetrize(&(&a_half * &b.covariance * &a_half)));
    let bures = a.covariance.trace() + b.covariance.trace() - 2.0 * cross.trace();
    Ok((&a.mean - &b.mean).norm_squared() + bures.max(0.0))
}
