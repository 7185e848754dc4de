//! Reproduction data for the three optimal-transport illustrations:
//! - `ot_gaussian_geodesic.csv`: closed-form Gaussian interpolant densities
//!   along the geodesic between N(−1.1, 0.4) and N(1.4, 0.01), with the
//!   moments of the discrete McCann interpolant alongside;
//! - `ot_mccann_sweep.csv`: atoms of the displacement interpolant between a
//!   Γ(2, scale 2) histogram and N(6.5, 1) for an η sweep;
//! - `ot_coupling.csv`: Sinkhorn couplings of two Gaussian mixtures for
//!   γ ∈ {0.001, 1, 10};
//! - `ot_demo.json`: scalar summaries of all three.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::output::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::ot::{
    build_cost_matrix, gaussian_w2_distance_squared, gaussian_w2_interpolate, mccann_interpolate,
    optimal_plan, sinkhorn_with, DiscreteDistribution, GaussianMoments, SinkhornOptions,
};

pub const DEMO_ETAS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEMO_GAMMAS: [f64; 3] = [0.001, 1.0, 10.0];

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn gamma2_pdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (-x / scale).exp() / (scale * scale)
    }
}

/// Histogram of `pdf` at the midpoints of `n` cells covering `[lo, hi]`.
pub fn discretize(lo: f64, hi: f64, n: usize, pdf: impl Fn(f64) -> f64) -> Result<DiscreteDistribution> {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) * h).collect();
    let ws: Vec<f64> = xs.iter().map(|&x| pdf(x)).collect();
    let (d, _) = DiscreteDistribution::from_1d(&xs, &ws)?.pruned(1e-300)?;
    Ok(d)
}

fn moments(d: &DiscreteDistribution) -> (f64, f64) {
    (d.mean()[0], d.covariance()[(0, 0)])
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicPoint {
    pub eta: f64,
    pub mean: f64,
    pub variance: f64,
    pub discrete_mean: f64,
    pub discrete_variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSummary {
    pub closed_form_distance_squared: f64,
    pub discrete_distance_squared: f64,
    pub points: Vec<GeodesicPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub eta: f64,
    pub mean: f64,
    pub atoms: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub source_mean: f64,
    pub target_mean: f64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingSummary {
    pub gamma: f64,
    pub entropy: f64,
    pub transport_cost: f64,
    /// Frobenius distance to the independent coupling.
    pub distance_to_independent: f64,
    pub iterations: usize,
    pub marginal_residual: f64,
    pub log_domain: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OtDemo {
    pub schema_version: u32,
    pub gaussian_geodesic: GeodesicSummary,
    pub mccann_sweep: SweepSummary,
    pub couplings: Vec<CouplingSummary>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Computes the three illustrations and writes them to `dir`.
pub fn run_ot_demo(dir: &Path) -> Result<OtDemo> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    // Gaussian geodesic.
    let (ga, gb) = (GaussianMoments::univariate(-1.1, 0.4)?, GaussianMoments::univariate(1.4, 0.01)?);
    let a = discretize(-5.0, 5.0, 2000, |x| normal_pdf(x, -1.1, 0.4))?;
    let b = discretize(-5.0, 5.0, 2000, |x| normal_pdf(x, 1.4, 0.01))?;
    let plan = optimal_plan(&a, &b, 0.0)?;
    let mut csv = String::from("eta,x,density\n");
    let mut points = Vec::new();
    for &eta in &DEMO_ETAS {
        let g = gaussian_w2_interpolate(&ga, &gb, eta)?;
        let (mean, var) = (g.mean[0], g.covariance[(0, 0)]);
        for k in 0..=400 {
            let x = -4.0 + k as f64 * 0.02;
            writeln!(csv, "{eta},{x},{}", normal_pdf(x, mean, var)).unwrap();
        }
        let (dm, dv) = moments(&mccann_interpolate(&plan, &a, &b, eta)?);
        points.push(GeodesicPoint { eta, mean, variance: var, discrete_mean: dm, discrete_variance: dv });
    }
    write_file(&dir.join("ot_gaussian_geodesic.csv"), &csv)?;
    let gaussian_geodesic = GeodesicSummary {
        closed_form_distance_squared: gaussian_w2_distance_squared(&ga, &gb)?,
        discrete_distance_squared: plan.transport_cost,
        points,
    };

    // McCann sweep between a skewed and a symmetric histogram.
    let src = discretize(0.0, 30.0, 300, |x| gamma2_pdf(x, 2.0))?;
    let tgt = discretize(1.5, 11.5, 200, |x| normal_pdf(x, 6.5, 1.0))?;
    let plan = optimal_plan(&src, &tgt, 0.0)?;
    let mut csv = String::from("eta,x,weight\n");
    let mut points = Vec::new();
    for &eta in &DEMO_ETAS {
        let z = mccann_interpolate(&plan, &src, &tgt, eta)?;
        for k in 0..z.len() {
            writeln!(csv, "{eta},{},{}", z.support()[(0, k)], z.weights()[k]).unwrap();
        }
        points.push(SweepPoint { eta, mean: z.mean()[0], atoms: z.len() });
    }
    write_file(&dir.join("ot_mccann_sweep.csv"), &csv)?;
    let mccann_sweep = SweepSummary { source_mean: src.mean()[0], target_mean: tgt.mean()[0], points };

    // Entropic couplings of two mixtures.
    let px = discretize(-16.0, -4.0, 100, |x| {
        0.5 * normal_pdf(x, -12.0, 0.4) + 0.5 * normal_pdf(x, -8.0, 0.8)
    })?;
    let py = discretize(-2.0, 16.0, 100, |x| 0.55 * normal_pdf(x, 5.0, 4.0) + 0.45 * normal_pdf(x, 9.5, 4.0))?;
    let cost = build_cost_matrix(&px, &py, 2.0)?;
    let mut csv = String::from("gamma,i,j,x,y,mass\n");
    let mut couplings = Vec::new();
    for &gamma in &DEMO_GAMMAS {
        let (plan, state) = sinkhorn_with(&cost, px.weights(), py.weights(), gamma, &SinkhornOptions::default())?;
        for j in 0..plan.mass.ncols() {
            for i in 0..plan.mass.nrows() {
                let u = plan.mass[(i, j)];
                if u > 1e-12 {
                    writeln!(csv, "{gamma},{i},{j},{},{},{u}", px.support()[(0, i)], py.support()[(0, j)]).unwrap();
                }
            }
        }
        couplings.push(CouplingSummary {
            gamma,
            entropy: plan.entropy(),
            transport_cost: plan.transport_cost,
            distance_to_independent: (&plan.mass - plan.outer_product()).norm(),
            iterations: state.iterations_used,
            marginal_residual: state.marginal_residual,
            log_domain: state.log_domain,
        });
    }
    write_file(&dir.join("ot_coupling.csv"), &csv)?;

    let demo = OtDemo { schema_version: SCHEMA_VERSION, gaussian_geodesic, mccann_sweep, couplings };
    let json = serde_json::to_string_pretty(&demo).map_err(|e| Error::Serialization(e.to_string()))?;
    write_file(&dir.join("ot_demo.json"), &(json + "\n"))?;
    Ok(demo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_summaries() {
        let dir = tempfile::tempdir().unwrap();
        let demo = run_ot_demo(dir.path()).unwrap();
        let mid = &demo.mccann_sweep.points[5];
        assert!((mid.mean - 5.25).abs() < 0.01, "{}", mid.mean);
        let exp = 0.5 * demo.mccann_sweep.source_mean + 0.5 * demo.mccann_sweep.target_mean;
        assert!((mid.mean - exp).abs() < 1e-8);
        let h: Vec<f64> = demo.couplings.iter().map(|c| c.entropy).collect();
        assert!(h.windows(2).all(|w| w[0] <= w[1]), "{h:?}");
        let g = &demo.gaussian_geodesic;
        assert!((g.discrete_distance_squared / g.closed_form_distance_squared - 1.0).abs() < 0.02);
        for f in ["ot_gaussian_geodesic.csv", "ot_mccann_sweep.csv", "ot_coupling.csv", "ot_demo.json"] {
            assert!(dir.path().join(f).exists());
        }
    }
}
