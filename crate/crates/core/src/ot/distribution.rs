use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// Per-atom tolerance on the histogram sum.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A weighted point cloud over R^m: `p = Σ_k w_k δ_{x_k}`.
///
/// Support points are stored as the columns of an `m × K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: DMatrix<f64>,
    weights: DVector<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if support.ncols() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} support points but {} weights",
                support.ncols(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if support.nrows() == 0 {
            return Err(Error::invalid("support", "points must have dimension >= 1"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "must be finite and non-negative"));
        }
        if support.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("support", "must be finite"));
        }
        let sum = weights.sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE * weights.len() as f64 {
            return Err(Error::invalid(
                "weights",
                format!("must sum to 1, got {sum:.15}"),
            ));
        }
        Ok(Self { support, weights })
    }

    /// Normalizes arbitrary non-negative masses to a histogram.
    pub fn from_masses(support: DMatrix<f64>, masses: DVector<f64>) -> Result<Self> {
        let total = masses.sum();
        if !(total > 0.0) || masses.iter().any(|m| *m < 0.0) {
            return Err(Error::invalid("masses", "must be non-negative with positive total"));
        }
        Self::new(support, masses / total)
    }

    pub fn uniform(support: DMatrix<f64>) -> Result<Self> {
        let k = support.ncols();
        Self::new(support, DVector::from_element(k, 1.0 / k.max(1) as f64))
    }

    /// One-dimensional distribution from scalar locations and masses.
    pub fn from_1d(points: &[f64], masses: &[f64]) -> Result<Self> {
        Self::from_masses(
            DMatrix::from_row_slice(1, points.len(), points),
            DVector::from_column_slice(masses),
        )
    }

    pub fn dirac(point: DVector<f64>) -> Self {
        let m = point.len();
        Self {
            support: DMatrix::from_column_slice(m, 1, point.as_slice()),
            weights: DVector::from_element(1, 1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.nrows()
    }

    pub fn support(&self) -> &DMatrix<f64> {
        &self.support
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn point(&self, k: usize) -> DVectorView<'_, f64> {
        self.support.column(k)
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.support * &self.weights
    }

    /// Weighted covariance (normalized by total weight, not `K - 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut cov = DMatrix::zeros(self.dim(), self.dim());
        for (k, w) in self.weights.iter().enumerate() {
            let d = self.support.column(k) - &mean;
            cov += (&d * d.transpose()) * *w;
        }
        cov
    }

    pub fn translated(&self, shift: &DVector<f64>) -> Self {
        let mut support = self.support.clone();
        for mut col in support.column_iter_mut() {
            col += shift;
        }
        Self {
            support,
            weights: self.weights.clone(),
        }
    }

    /// The same histogram moved to zero mean.
    pub fn centered(&self) -> Self {
        self.translated(&(-self.mean()))
    }

    /// True when every weight equals `1/K` to within rounding.
    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= 1e-12 * u.max(1e-300) + 1e-15)
    }

    /// Drops atoms lighter than `threshold` and renormalizes. Returns the
    /// retained indices into the original atoms.
    pub fn pruned(&self, threshold: f64) -> Result<(Self, Vec<usize>)> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| self.weights[k] >= threshold)
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let support = self.support.select_columns(keep.iter());
        let masses = DVector::from_iterator(keep.len(), keep.iter().map(|&k| self.weights[k]));
        Ok((Self::from_masses(support, masses)?, keep))
    }
}
