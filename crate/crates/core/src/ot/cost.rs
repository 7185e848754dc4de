use nalgebra::DMatrix;

use super::DiscreteDistribution;
use crate::error::{Error, Result};

/// Ground cost `c_ij = ‖x_i − y_j‖_q^q` between two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: DMatrix<f64>,
    exponent: f64,
}

impl CostMatrix {
    /// Wraps raw entries; they must be finite and non-negative.
    pub fn from_entries(entries: DMatrix<f64>, exponent: f64) -> Result<Self> {
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("cost", "entries must be finite and non-negative"));
        }
        if !(exponent > 0.0) {
            return Err(Error::invalid("q", "exponent must be positive"));
        }
        Ok(Self { entries, exponent })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn max(&self) -> f64 {
        self.entries.max()
    }

    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.entries.iter().copied().collect();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
        let upper = *m;
        if v.len() % 2 == 1 {
            upper
        } else {
            let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lower + upper)
        }
    }
}

pub fn build_cost_matrix(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    q: f64,
) -> Result<CostMatrix> {
    if !(q > 0.0) {
        return Err(Error::invalid("q", format!("exponent must be positive, got {q}")));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source points live in R^{} but target points in R^{}",
            source.dim(),
            target.dim()
        )));
    }
    let xs = source.support();
    let ys = target.support();
    let m = source.dim();
    let mut entries = DMatrix::zeros(source.len(), target.len());
    for j in 0..ys.ncols() {
        let y = ys.column(j);
        for i in 0..xs.ncols() {
            let x = xs.column(i);
            let mut acc = 0.0;
            if q == 2.0 {
                for d in 0..m {
                    let diff = x[d] - y[d];
                    acc += diff * diff;
                }
            } else {
                for d in 0..m {
                    acc += (x[d] - y[d]).abs().powf(q);
                }
            }
            entries[(i, j)] = acc;
        }
    }
    Ok(CostMatrix { entries, exponent: q })
}
