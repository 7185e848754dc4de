use nalgebra::{DMatrix, DVector};

use super::{DiscreteDistribution, TransportPlan};
use crate::error::{Error, Result};

/// Atoms of the interpolant lighter than this fraction of the total mass are
/// dropped.
pub const ATOM_PRUNE_THRESHOLD: f64 = 1e-12;

/// Plan marginals must reproduce the source/target weights to this accuracy.
const MARGINAL_MATCH_TOLERANCE: f64 = 1e-6;

/// Displacement interpolation `Σ_ij u_ij δ_{η x_i + (1−η) y_j}`.
///
/// `eta = 1` returns the source atoms with the plan's row sums and `eta = 0`
/// the target atoms with its column sums, so the endpoints reproduce the
/// input histograms atom for atom.
pub fn mccann_interpolate(
    plan: &TransportPlan,
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    eta: f64,
) -> Result<DiscreteDistribution> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", format!("must lie in [0, 1], got {eta}")));
    }
    if plan.mass.nrows() != source.len() || plan.mass.ncols() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan is {}x{} but distributions have {} and {} atoms",
            plan.mass.nrows(),
            plan.mass.ncols(),
            source.len(),
            target.len()
        )));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch("source and target dimensions differ".into()));
    }
    let row_sums: DVector<f64> = plan.mass.column_sum();
    let col_sums: DVector<f64> = plan.mass.row_sum().transpose();
    if (&row_sums - source.weights()).amax() > MARGINAL_MATCH_TOLERANCE
        || (&col_sums - target.weights()).amax() > MARGINAL_MATCH_TOLERANCE
    {
        return Err(Error::invalid(
            "plan",
            "marginals do not match the source/target weights",
        ));
    }
    let total = plan.mass.sum();
    let cutoff = ATOM_PRUNE_THRESHOLD * total;

    if eta == 1.0 {
        return collapsed(source.support(), &row_sums, cutoff);
    }
    if eta == 0.0 {
        return collapsed(target.support(), &col_sums, cutoff);
    }

    let m = source.dim();
    let mut atoms: Vec<(usize, usize)> = Vec::new();
    for j in 0..plan.mass.ncols() {
        for i in 0..plan.mass.nrows() {
            if plan.mass[(i, j)] >= cutoff && plan.mass[(i, j)] > 0.0 {
                atoms.push((i, j));
            }
        }
    }
    let mut support = DMatrix::zeros(m, atoms.len());
    let mut masses = DVector::zeros(atoms.len());
    for (k, &(i, j)) in atoms.iter().enumerate() {
        let x = source.point(i);
        let y = target.point(j);
        let mut col = support.column_mut(k);
        for d in 0..m {
            col[d] = eta * x[d] + (1.0 - eta) * y[d];
        }
        masses[k] = plan.mass[(i, j)];
    }
    DiscreteDistribution::from_masses(support, masses)
}

fn collapsed(points: &DMatrix<f64>, masses: &DVector<f64>, cutoff: f64) -> Result<DiscreteDistribution> {
    let keep: Vec<usize> = (0..masses.len())
        .filter(|&k| masses[k] >= cutoff && masses[k] > 0.0)
        .collect();
    let support = points.select_columns(keep.iter());
    let m = DVector::from_iterator(keep.len(), keep.iter().map(|&k| masses[k]));
    DiscreteDistribution::from_masses(support, m)
}
