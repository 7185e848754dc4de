//! Ensembles, their histograms, and the sampling/moment routines shared by
//! every assimilator.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Covariance};
use crate::ot::DiscreteDistribution;

/// `M` state vectors in `R^m`, stored as the columns of an `m × M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: DMatrix<f64>,
    pub time: f64,
}

impl Ensemble {
    pub fn new(members: DMatrix<f64>, time: f64) -> Result<Self> {
        if members.ncols() == 0 {
            return Err(Error::invalid("ensemble", "needs at least one member"));
        }
        if members.nrows() == 0 {
            return Err(Error::invalid("ensemble", "members must have dimension >= 1"));
        }
        Ok(Self { members, time })
    }

    /// `size` copies of `state`.
    pub fn replicated(state: &DVector<f64>, size: usize, time: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(state.len(), size, |i, _| state[i]), time)
    }

    pub fn size(&self) -> usize {
        self.members.ncols()
    }

    pub fn dim(&self) -> usize {
        self.members.nrows()
    }

    pub fn member(&self, k: usize) -> DVector<f64> {
        self.members.column(k).into_owned()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.members.column_sum() / self.size() as f64
    }

    fn variances(&self) -> DVector<f64> {
        let m = self.size();
        let mean = self.mean();
        DVector::from_fn(self.dim(), |i, _| {
            let ss: f64 = self.members.row(i).iter().map(|v| (v - mean[i]).powi(2)).sum();
            ss / (m - 1) as f64
        })
    }

    /// Per-coordinate sample standard deviation (`1/(M−1)`); zero for `M = 1`.
    pub fn spread(&self) -> DVector<f64> {
        let m = self.size();
        if m < 2 {
            return DVector::zeros(self.dim());
        }
        self.variances().map(f64::sqrt)
    }

    /// Sum of per-coordinate sample variances, i.e. `tr(B)` without forming
    /// the `m × m` matrix.
    pub fn total_variance(&self) -> Result<f64> {
        if self.size() < 2 {
            return Err(Error::invalid("ensemble", "covariance needs at least two members"));
        }
        Ok(self.variances().sum())
    }
}

/// Sample mean and unbiased sample covariance of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl CovarianceEstimate {
    pub fn covariance(&self) -> Covariance {
        Covariance::Dense(self.matrix.clone())
    }
}

/// `(1/M) Σ δ_{x_i}`. Duplicate members stay separate atoms.
pub fn ensemble_to_histogram(e: &Ensemble) -> DiscreteDistribution {
    DiscreteDistribution::uniform(e.members.clone())
        .expect("ensemble members are a non-empty finite matrix")
}

/// `n` atoms `y + v_j`, `v_j ~ N(0, R)`, each with weight `1/n`.
pub fn perturb_observations<R: Rng + ?Sized>(
    y: &DVector<f64>,
    r: &Covariance,
    n: usize,
    rng: &mut R,
) -> Result<DiscreteDistribution> {
    if n == 0 {
        return Err(Error::invalid("n", "number of perturbed observations must be >= 1"));
    }
    if r.dim() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "observation has length {} but R is {}x{}",
            y.len(),
            r.dim(),
            r.dim()
        )));
    }
    let factor = r.factor()?;
    let mut support = DMatrix::zeros(y.len(), n);
    for j in 0..n {
        let v = factor.sample(rng);
        support.set_column(j, &(y + v));
    }
    DiscreteDistribution::uniform(support)
}

/// `m` i.i.d. draws from the categorical law of `d` over its atoms.
pub fn multinomial_resample<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    m: usize,
    rng: &mut R,
) -> Result<Ensemble> {
    if d.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if m == 0 {
        return Err(Error::invalid("M", "ensemble size must be >= 1"));
    }
    let picker = WeightedIndex::new(d.weights().iter()).map_err(|_| Error::DegenerateWeights)?;
    let mut members = DMatrix::zeros(d.dim(), m);
    for k in 0..m {
        members.set_column(k, &d.support().column(picker.sample(rng)));
    }
    Ensemble::new(members, 0.0)
}

/// Sample mean and `1/(M−1)` covariance.
pub fn estimate_covariance(e: &Ensemble) -> Result<CovarianceEstimate> {
    let m = e.size();
    if m < 2 {
        return Err(Error::invalid("ensemble", "covariance needs at least two members"));
    }
    let mean = e.mean();
    let mut anomalies = e.members.clone();
    for mut col in anomalies.column_iter_mut() {
        col -= &mean;
    }
    let matrix = symmetrize(&(&anomalies * anomalies.transpose() / (m - 1) as f64));
    Ok(CovarianceEstimate { matrix, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn histogram_of_four_members() {
        let e = Ensemble::new(DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 2.0, 3.0]), 0.0).unwrap();
        let h = ensemble_to_histogram(&e);
        assert_eq!(h.len(), 4);
        assert!(h.weights().iter().all(|w| *w == 0.25));
    }

    #[test]
    fn zero_r_gives_identical_atoms() {
        let y = DVector::from_vec(vec![1.0, -2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = perturb_observations(&y, &Covariance::Dense(DMatrix::zeros(2, 2)), 5, &mut rng).unwrap();
        for k in 0..5 {
            assert_eq!(d.point(k), y);
        }
    }

    #[test]
    fn resampling_point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DiscreteDistribution::from_1d(&[3.0, 9.0], &[1.0, 0.0]).unwrap();
        let e = multinomial_resample(&d, 50, &mut rng).unwrap();
        assert!(e.members.iter().all(|v| *v == 3.0));
    }

    #[test]
    fn two_member_covariance() {
        let e = Ensemble::new(DMatrix::from_row_slice(1, 2, &[0.0, 2.0]), 0.0).unwrap();
        let c = estimate_covariance(&e).unwrap();
        assert_eq!(c.mean[0], 1.0);
        assert_eq!(c.matrix[(0, 0)], 2.0);
        assert_eq!(e.total_variance().unwrap(), 2.0);
    }

    #[test]
    fn identical_members_have_zero_covariance() {
        let e = Ensemble::replicated(&DVector::from_vec(vec![1.0, 2.0, 3.0]), 7, 0.0).unwrap();
        assert_eq!(estimate_covariance(&e).unwrap().matrix, DMatrix::zeros(3, 3));
    }

    #[test]
    fn single_member_covariance_is_an_error() {
        let e = Ensemble::new(DMatrix::from_row_slice(1, 1, &[0.0]), 0.0).unwrap();
        assert!(estimate_covariance(&e).is_err());
    }
}
