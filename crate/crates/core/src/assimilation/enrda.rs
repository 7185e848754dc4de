use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::{AnalysisResult, AssimilatorConfig, CycleDiagnostics, EtaPolicy, GammaPolicy, MethodStreams};
use crate::distributions::{ensemble_to_histogram, perturb_observations, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::Covariance;
use crate::ot::{build_cost_matrix, mccann_interpolate, sinkhorn_with, ATOM_PRUNE_THRESHOLD};

/// The pre-resampling analysis histogram is materialized only when it has at
/// most this many `(atoms × dimension)` entries.
pub const HISTOGRAM_ATOM_LIMIT: usize = 1 << 20;

/// One ensemble Riemannian analysis.
///
/// The background members and `N` perturbed observations are coupled by an
/// entropic transport plan `U`; the analysis distribution is the McCann
/// interpolant `Σ u_ij δ(η x_i + (1−η) y_j)` and the new members are `M`
/// multinomial draws from it. Draws pick a pair `(i, j)` with probability
/// `u_ij` directly from the plan, so the `M·N` interpolant atoms never need to
/// exist for large states.
pub fn enrda_analysis(
    background: &Ensemble,
    y: &DVector<f64>,
    r: &Covariance,
    cfg: &AssimilatorConfig,
    streams: &mut MethodStreams,
) -> Result<AnalysisResult> {
    if y.len() != background.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observation has length {} but the state has {}",
            y.len(),
            background.dim()
        )));
    }
    let p_b = ensemble_to_histogram(background);
    let p_y = perturb_observations(y, r, cfg.observation_members(), &mut streams.perturbation)?;
    let cost = build_cost_matrix(&p_b, &p_y, 2.0)?;

    let gamma = match cfg.gamma {
        GammaPolicy::Fixed { value } => value,
        GammaPolicy::MedianFraction { fraction } => {
            let median = cost.median();
            if median > 0.0 {
                fraction * median
            } else {
                // Every background member sits on every observation atom.
                fraction
            }
        }
    };
    let opts = cfg.sinkhorn_options();
    let (plan, state) = sinkhorn_with(&cost, p_b.weights(), p_y.weights(), gamma, &opts)?;
    if !state.converged(opts.tolerance) {
        return Err(Error::SinkhornNotConverged {
            residual: state.marginal_residual,
            iterations: state.iterations_used,
        });
    }

    let eta = match cfg.eta {
        EtaPolicy::Fixed { value } => value,
        EtaPolicy::TraceRatio => {
            let tr_r = r.trace();
            let tr_b = if background.size() >= 2 { background.total_variance()? } else { 0.0 };
            if tr_r + tr_b > 0.0 {
                tr_r / (tr_r + tr_b)
            } else {
                1.0
            }
        }
    };
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", format!("policy produced {eta} outside [0, 1]")));
    }

    let row_mass: DVector<f64> = plan.mass.column_sum();
    let col_mass: DVector<f64> = plan.mass.row_sum().transpose();
    let total = plan.mass.sum();
    let mean = (p_b.support() * &row_mass * eta + p_y.support() * &col_mass * (1.0 - eta)) / total;

    let histogram = if background.dim() * background.size() * p_y.len() <= HISTOGRAM_ATOM_LIMIT {
        Some(mccann_interpolate(&plan, &p_b, &p_y, eta)?)
    } else {
        None
    };

    let cutoff = ATOM_PRUNE_THRESHOLD * total;
    let weights = plan.mass.iter().map(|&u| if u >= cutoff { u } else { 0.0 });
    let picker = WeightedIndex::new(weights).map_err(|_| Error::DegenerateWeights)?;
    let m = background.size();
    let dim = background.dim();
    let mut members = DMatrix::zeros(dim, m);
    for k in 0..m {
        let flat = picker.sample(&mut streams.resampling);
        let (i, j) = (flat % m, flat / m);
        let x = background.members.column(i);
        let yj = p_y.support().column(j);
        let mut out = members.column_mut(k);
        for d in 0..dim {
            out[d] = eta * x[d] + (1.0 - eta) * yj[d];
        }
    }

    Ok(AnalysisResult {
        ensemble: Ensemble::new(members, background.time)?,
        mean,
        histogram,
        diagnostics: CycleDiagnostics {
            time: background.time,
            eta: Some(eta),
            gamma: Some(gamma),
            transport_cost: Some(plan.transport_cost),
            sinkhorn_iterations: Some(state.iterations_used),
            marginal_residual: Some(state.marginal_residual),
            log_domain: Some(state.log_domain),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assimilation::Method;

    fn cfg(eta: f64, gamma: f64, n: usize) -> AssimilatorConfig {
        AssimilatorConfig {
            eta: EtaPolicy::Fixed { value: eta },
            gamma: GammaPolicy::Fixed { value: gamma },
            observation_members: Some(n),
            ..AssimilatorConfig::new("enrda", Method::Enrda)
        }
    }

    fn line(values: &[f64]) -> Ensemble {
        Ensemble::new(DMatrix::from_row_slice(1, values.len(), values), 0.0).unwrap()
    }

    #[test]
    fn eta_one_resamples_the_background() {
        let bg = line(&[0.0, 1.0, 5.0]);
        let y = DVector::from_vec(vec![20.0]);
        let r = Covariance::scaled_identity(1, 1.0);
        let mut streams = MethodStreams::from_seed(3);
        let out = enrda_analysis(&bg, &y, &r, &cfg(1.0, 1.0, 4), &mut streams).unwrap();
        assert!(out.ensemble.members.iter().all(|v| [0.0, 1.0, 5.0].contains(v)));
        let h = out.histogram.unwrap();
        assert_eq!(h.support(), &bg.members);
        assert!((h.weights() - DVector::from_element(3, 1.0 / 3.0)).amax() <= 1e-8);
    }

    #[test]
    fn eta_zero_with_exact_observation_collapses_onto_it() {
        let bg = line(&[0.0, 1.0, 5.0, -2.0]);
        let y = DVector::from_vec(vec![3.5]);
        let r = Covariance::Dense(DMatrix::zeros(1, 1));
        let mut streams = MethodStreams::from_seed(3);
        let out = enrda_analysis(&bg, &y, &r, &cfg(0.0, 1.0, 1), &mut streams).unwrap();
        assert!(out.ensemble.members.iter().all(|v| *v == 3.5));
    }

    #[test]
    fn two_by_two_midpoints() {
        // With R = 0 and N = 2 both observation atoms sit at y, so feed the
        // perturbed cloud directly through the transport primitives instead.
        use crate::ot::{optimal_plan, DiscreteDistribution};
        let x = DiscreteDistribution::from_1d(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        let y = DiscreteDistribution::from_1d(&[0.1, 1.1], &[1.0, 1.0]).unwrap();
        let cost = build_cost_matrix(&x, &y, 2.0).unwrap();
        let (plan, _) = sinkhorn_with(&cost, x.weights(), y.weights(), 1e-3, &Default::default()).unwrap();
        let exact = optimal_plan(&x, &y, 0.0).unwrap();
        assert!((&plan.mass - &exact.mass).amax() < 1e-9);
        let a = mccann_interpolate(&plan, &x, &y, 0.5).unwrap();
        assert_eq!(a.len(), 2);
        assert!((a.support()[(0, 0)] - 0.05).abs() < 1e-12);
        assert!((a.support()[(0, 1)] - 1.05).abs() < 1e-12);
        assert!((a.weights()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn trace_ratio_eta() {
        let bg = line(&[0.0, 2.0]);
        let y = DVector::from_vec(vec![1.0]);
        let r = Covariance::scaled_identity(1, 2.0);
        let c = AssimilatorConfig { eta: EtaPolicy::TraceRatio, ..cfg(0.0, 1.0, 8) };
        let out = enrda_analysis(&bg, &y, &r, &c, &mut MethodStreams::from_seed(0)).unwrap();
        assert_eq!(out.diagnostics.eta, Some(0.5));
    }

    #[test]
    fn analysis_mean_interpolates_marginal_means() {
        let bg = line(&[0.0, 1.0, 5.0, -2.0, 0.3]);
        let y = DVector::from_vec(vec![3.0]);
        let r = Covariance::scaled_identity(1, 4.0);
        let out = enrda_analysis(&bg, &y, &r, &cfg(0.3, 0.5, 7), &mut MethodStreams::from_seed(9)).unwrap();
        let h = out.histogram.unwrap();
        assert!((h.mean()[0] - out.mean[0]).abs() < 1e-10, "{} vs {}", h.mean()[0], out.mean[0]);
    }
}
