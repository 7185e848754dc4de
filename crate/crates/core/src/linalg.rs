//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for symmetry / semidefiniteness checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

/// An error covariance, stored densely or as its diagonal.
///
/// The diagonal form exists for gridded states (10^4 cells) where a dense
/// matrix would not fit in memory.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn identity(n: usize) -> Self {
        Covariance::Diagonal(DVector::from_element(n, 1.0))
    }

    pub fn scaled_identity(n: usize, variance: f64) -> Self {
        Covariance::Diagonal(DVector::from_element(n, variance))
    }

    pub fn dim(&self) -> usize {
        match self {
            Covariance::Dense(m) => m.nrows(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Covariance::Dense(m) => m.trace(),
            Covariance::Diagonal(d) => d.sum(),
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            Covariance::Dense(m) => m.diagonal(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Dense(m) => m.clone(),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        match self {
            Covariance::Dense(m) => Covariance::Dense(m * factor),
            Covariance::Diagonal(d) => Covariance::Diagonal(d * factor),
        }
    }

    /// Validates symmetry and semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        match self {
            Covariance::Diagonal(d) => {
                if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::NotPositiveSemidefinite(
                        "diagonal covariance has a negative or non-finite entry".into(),
                    ));
                }
                Ok(())
            }
            Covariance::Dense(m) => check_psd(m),
        }
    }

    /// A sampling factor `L` with `L Lᵀ = self` (Cholesky, jittered if needed).
    pub fn factor(&self) -> Result<CovarianceFactor> {
        self.validate()?;
        match self {
            Covariance::Diagonal(d) => Ok(CovarianceFactor::Diagonal(d.map(f64::sqrt))),
            Covariance::Dense(m) => Ok(CovarianceFactor::Dense(cholesky_psd(m)?)),
        }
    }
}

/// Lower-triangular (or diagonal) square root of a covariance.
#[derive(Debug, Clone)]
pub enum CovarianceFactor {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl CovarianceFactor {
    pub fn dim(&self) -> usize {
        match self {
            CovarianceFactor::Dense(l) => l.nrows(),
            CovarianceFactor::Diagonal(d) => d.len(),
        }
    }

    /// One zero-mean Gaussian draw with the factored covariance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        match self {
            CovarianceFactor::Dense(l) => l * z,
            CovarianceFactor::Diagonal(d) => d.component_mul(&z),
        }
    }
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveSemidefinite("non-finite entry".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotPositiveSemidefinite("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NotPositiveSemidefinite(format!(
            "smallest eigenvalue {min:e}"
        )));
    }
    Ok(())
}

/// Cholesky factor of a symmetric PSD matrix.
///
/// When the plain factorization fails (semidefinite input) a diagonal jitter of
/// `1e-12 * trace / n` is added once. An all-zero matrix factors to zero.
pub fn cholesky_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol.l());
    }
    let n = m.nrows();
    let jitter = 1e-12 * m.trace() / n as f64;
    let mut jittered = m.clone();
    for i in 0..n {
        jittered[(i, i)] += jitter;
    }
    Cholesky::new(jittered)
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveSemidefinite("Cholesky failed after jitter".into()))
}

/// Cholesky decomposition of a symmetric positive-definite matrix, or a
/// `Singular` error naming `what`.
pub fn cholesky_spd(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Principal square root of a symmetric PSD matrix. Tiny negative
/// eigenvalues from rounding are clamped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(m, |l| l.max(0.0).sqrt())
}

/// Inverse principal square root; errors if the matrix is numerically singular.
pub fn sym_inv_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.amax();
    if eig.eigenvalues.min() <= 1e-14 * max.max(f64::MIN_POSITIVE) {
        return Err(Error::Singular(format!("{what} is singular")));
    }
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(f);
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    symmetrize(&r)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric Toeplitz matrix whose `k`-th off-diagonals equal `bands[k]`
/// (entries beyond the given bands are zero).
pub fn toeplitz(n: usize, bands: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j);
        bands.get(k).copied().unwrap_or(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_covariance_samples_zero() {
        let f = Covariance::Dense(DMatrix::zeros(2, 2)).factor().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(f.sample(&mut rng), DVector::zeros(2));
    }

    #[test]
    fn semidefinite_rank_one_factors_with_jitter() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let l = cholesky_psd(&m).unwrap();
        assert!((&l * l.transpose() - &m).amax() < 1e-9);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            Covariance::Dense(m).validate(),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_sqrt(&m);
        assert!((&s * &s - &m).amax() < 1e-12);
        let is = sym_inv_sqrt(&m, "m").unwrap();
        assert!((&is * &m * &is - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn toeplitz_bands() {
        let t = toeplitz(3, &[1.0, 0.5, 0.25]);
        assert_eq!(t[(0, 2)], 0.25);
        assert_eq!(t[(1, 0)], 0.5);
        assert_eq!(t[(2, 2)], 1.0);
    }
}
