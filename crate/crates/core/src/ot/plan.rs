use nalgebra::{DMatrix, DVector};

use super::CostMatrix;

/// A coupling `U ≥ 0` between two histograms together with its transport cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub mass: DMatrix<f64>,
    pub row_marginal: DVector<f64>,
    pub col_marginal: DVector<f64>,
    /// `⟨C, U⟩`.
    pub transport_cost: f64,
    /// Entropic regularization used to produce the plan; 0 for exact plans.
    pub gamma: f64,
}

impl TransportPlan {
    pub fn new(
        mass: DMatrix<f64>,
        cost: &CostMatrix,
        row_marginal: DVector<f64>,
        col_marginal: DVector<f64>,
        gamma: f64,
    ) -> Self {
        let transport_cost = cost.entries().dot(&mass);
        Self {
            mass,
            row_marginal,
            col_marginal,
            transport_cost,
            gamma,
        }
    }

    /// `max(‖U1 − a‖∞, ‖Uᵀ1 − b‖∞)`.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self.mass.column_sum();
        let cols = self.mass.row_sum().transpose();
        let r = (rows - &self.row_marginal).amax();
        let c = (cols - &self.col_marginal).amax();
        r.max(c)
    }

    /// Shannon entropy `−Σ u log u` (zero entries contribute nothing).
    pub fn entropy(&self) -> f64 {
        -self
            .mass
            .iter()
            .filter(|u| **u > 0.0)
            .map(|u| u * u.ln())
            .sum::<f64>()
    }

    /// The independent coupling `a bᵀ`.
    pub fn outer_product(&self) -> DMatrix<f64> {
        &self.row_marginal * self.col_marginal.transpose()
    }
}
