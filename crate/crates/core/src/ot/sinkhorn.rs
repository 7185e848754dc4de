//! Entropic optimal transport by Sinkhorn matrix scaling.
//!
//! The optimal entropic coupling has the form `U = diag(v) K diag(w)` with
//! Gibbs kernel `K = exp(−C/γ)`; `v` and `w` are found by alternating
//! `v ← a ⊘ (K w)`, `w ← b ⊘ (Kᵀ v)`.
//!
//! For `γ < LOG_DOMAIN_THRESHOLD · max(C)` the kernel underflows, so the same
//! fixed point is computed on the potentials `f = γ log v`, `g = γ log w` with
//! log-sum-exp updates. In that regime the solve is warm-started by a
//! geometric schedule of decreasing regularizations ending at `γ`; only the
//! last stage determines the returned plan.

use nalgebra::{DMatrix, DVector};

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Relative to the largest cost entry.
pub const LOG_DOMAIN_THRESHOLD: f64 = 1e-2;
/// Atoms lighter than this are removed before scaling.
pub const ZERO_WEIGHT_THRESHOLD: f64 = 1e-12;

const MARGINAL_SUM_TOLERANCE: f64 = 1e-9;
const SCHEDULE_FACTOR: f64 = 0.5;
const STAGE_TOLERANCE: f64 = 1e-4;
const STAGE_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Solver state at termination.
///
/// Scalings are kept as logarithms (`log v = f/γ`) because in the log-domain
/// regime `v` and `w` themselves overflow. Atoms pruned for zero weight carry
/// `−∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornState {
    pub log_scaling_row: DVector<f64>,
    pub log_scaling_col: DVector<f64>,
    pub gamma: f64,
    pub iterations_used: usize,
    pub marginal_residual: f64,
    pub log_domain: bool,
}

impl SinkhornState {
    pub fn scaling_row(&self) -> DVector<f64> {
        self.log_scaling_row.map(f64::exp)
    }

    pub fn scaling_col(&self) -> DVector<f64> {
        self.log_scaling_col.map(f64::exp)
    }

    /// `K = exp(−C/γ)`.
    pub fn gibbs_kernel(cost: &CostMatrix, gamma: f64) -> DMatrix<f64> {
        cost.entries().map(|c| (-c / gamma).exp())
    }

    pub fn converged(&self, tolerance: f64) -> bool {
        self.marginal_residual <= tolerance
    }
}

pub fn sinkhorn(
    cost: &CostMatrix,
    row_marginal: &DVector<f64>,
    col_marginal: &DVector<f64>,
    gamma: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(TransportPlan, SinkhornState)> {
    sinkhorn_with(
        cost,
        row_marginal,
        col_marginal,
        gamma,
        &SinkhornOptions {
            tolerance,
            max_iterations,
        },
    )
}

pub fn sinkhorn_with(
    cost: &CostMatrix,
    row_marginal: &DVector<f64>,
    col_marginal: &DVector<f64>,
    gamma: f64,
    options: &SinkhornOptions,
) -> Result<(TransportPlan, SinkhornState)> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", format!("must be positive and finite, got {gamma}")));
    }
    if row_marginal.len() != cost.nrows() || col_marginal.len() != cost.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}x{} but marginals have lengths {} and {}",
            cost.nrows(),
            cost.ncols(),
            row_marginal.len(),
            col_marginal.len()
        )));
    }
    check_histogram("row_marginal", row_marginal)?;
    check_histogram("col_marginal", col_marginal)?;

    let rows = heavy_atoms(row_marginal);
    let cols = heavy_atoms(col_marginal);
    let a = renormalized(row_marginal, &rows);
    let b = renormalized(col_marginal, &cols);
    let sub_cost: Vec<f64> = {
        // Column-major M' x N'.
        let mut c = Vec::with_capacity(rows.len() * cols.len());
        for &j in &cols {
            for &i in &rows {
                c.push(cost.entries()[(i, j)]);
            }
        }
        c
    };
    let sub = SubProblem {
        m: rows.len(),
        n: cols.len(),
        cost: sub_cost,
        a,
        b,
    };

    let max_cost = sub.cost.iter().copied().fold(0.0, f64::max);
    let log_domain = gamma < LOG_DOMAIN_THRESHOLD * max_cost;
    let (f, g, iterations) = if log_domain {
        solve_log_domain(&sub, gamma, max_cost, options)?
    } else {
        solve_scaling(&sub, gamma, options)?
    };

    let mut mass = DMatrix::zeros(cost.nrows(), cost.ncols());
    for (jj, &j) in cols.iter().enumerate() {
        for (ii, &i) in rows.iter().enumerate() {
            let c = sub.cost[jj * sub.m + ii];
            mass[(i, j)] = ((f[ii] + g[jj] - c) / gamma).exp();
        }
    }
    if mass.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFiniteKernel { gamma });
    }

    let mut log_row = DVector::from_element(cost.nrows(), f64::NEG_INFINITY);
    for (ii, &i) in rows.iter().enumerate() {
        log_row[i] = f[ii] / gamma;
    }
    let mut log_col = DVector::from_element(cost.ncols(), f64::NEG_INFINITY);
    for (jj, &j) in cols.iter().enumerate() {
        log_col[j] = g[jj] / gamma;
    }

    let plan = TransportPlan::new(mass, cost, row_marginal.clone(), col_marginal.clone(), gamma);
    let state = SinkhornState {
        log_scaling_row: log_row,
        log_scaling_col: log_col,
        gamma,
        iterations_used: iterations,
        marginal_residual: plan.marginal_violation(),
        log_domain,
    };
    Ok((plan, state))
}

struct SubProblem {
    m: usize,
    n: usize,
    /// Column-major `m x n`.
    cost: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn check_histogram(name: &str, h: &DVector<f64>) -> Result<()> {
    if h.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if h.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid(name, "entries must be finite and non-negative"));
    }
    let s = h.sum();
    if (s - 1.0).abs() > MARGINAL_SUM_TOLERANCE {
        return Err(Error::invalid(name, format!("must sum to 1, got {s:.12}")));
    }
    Ok(())
}

fn heavy_atoms(h: &DVector<f64>) -> Vec<usize> {
    (0..h.len()).filter(|&k| h[k] >= ZERO_WEIGHT_THRESHOLD).collect()
}

fn renormalized(h: &DVector<f64>, keep: &[usize]) -> Vec<f64> {
    let total: f64 = keep.iter().map(|&k| h[k]).sum();
    keep.iter().map(|&k| h[k] / total).collect()
}

/// Plain scaling iterations. Returns potentials `γ log v`, `γ log w`.
///
/// Small problems that have not converged after `NEWTON_WARMUP` iterations
/// switch to Newton steps on the potentials and resume scaling only if those
/// stop making progress.
fn solve_scaling(
    sub: &SubProblem,
    gamma: f64,
    options: &SinkhornOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let kernel: Vec<f64> = sub.cost.iter().map(|c| (-c / gamma).exp()).collect();
    let mut v = vec![1.0; sub.m];
    let mut w = vec![1.0; sub.n];
    let small = sub.m + sub.n <= NEWTON_MAX_ATOMS;
    let first = if small { NEWTON_WARMUP.min(options.max_iterations) } else { options.max_iterations };
    let (mut used, converged) = scale(sub, &kernel, gamma, &mut v, &mut w, options.tolerance, first)?;
    let to_potential = |x: &[f64]| x.iter().map(|x| gamma * x.ln()).collect::<Vec<f64>>();
    if converged || !small || used >= options.max_iterations {
        return Ok((to_potential(&v), to_potential(&w), used));
    }
    let (mut f, mut g) = (to_potential(&v), to_potential(&w));
    loop {
        let (_, residual) = dual_and_residual(sub, gamma, &f, &g);
        if residual <= options.tolerance || used >= options.max_iterations {
            return Ok((f, g, used));
        }
        if !newton_step(sub, gamma, &mut f, &mut g, residual) {
            break;
        }
        used += 1;
    }
    v = f.iter().map(|x| (x / gamma).exp()).collect();
    w = g.iter().map(|x| (x / gamma).exp()).collect();
    let (more, _) = scale(sub, &kernel, gamma, &mut v, &mut w, options.tolerance, options.max_iterations - used)?;
    Ok((to_potential(&v), to_potential(&w), used + more))
}

/// Alternating scaling updates from `v`, `w` until the row residual is at
/// most `tolerance` or `cap` updates were made. Returns the number of updates
/// and whether the tolerance was met.
fn scale(
    sub: &SubProblem,
    kernel: &[f64],
    gamma: f64,
    v: &mut [f64],
    w: &mut [f64],
    tolerance: f64,
    cap: usize,
) -> Result<(usize, bool)> {
    let (m, n) = (sub.m, sub.n);
    let mut kw = vec![0.0; m];
    let mut iterations = 0;
    loop {
        // K w
        kw.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..n {
            let wj = w[j];
            let col = &kernel[j * m..(j + 1) * m];
            for i in 0..m {
                kw[i] += col[i] * wj;
            }
        }
        if iterations > 0 {
            let residual = (0..m)
                .map(|i| (v[i] * kw[i] - sub.a[i]).abs())
                .fold(0.0, f64::max);
            if residual <= tolerance {
                return Ok((iterations, true));
            }
            if iterations >= cap {
                return Ok((iterations, false));
            }
        }
        for i in 0..m {
            v[i] = sub.a[i] / kw[i];
        }
        for j in 0..n {
            let col = &kernel[j * m..(j + 1) * m];
            let ktv: f64 = col.iter().zip(v.iter()).map(|(k, vi)| k * vi).sum();
            w[j] = sub.b[j] / ktv;
        }
        iterations += 1;
        if v.iter().chain(w.iter()).any(|x| !x.is_finite() || *x == 0.0) {
            return Err(Error::NonFiniteKernel { gamma });
        }
    }
}

/// Log-domain iterations with a decreasing regularization schedule.
///
/// Intermediate stages only warm-start the potentials. Small problems finish
/// the final stage with damped Newton steps after a short plain warmup.
/// Otherwise the final stage runs plain alternating updates; when their
/// observed linear rate is slow it
/// switches to over-relaxed updates `f ← (1−ω) f + ω f̂` with `ω` set from
/// the estimated rate, and falls back to plain updates from the saved
/// potentials if the relaxed iterates stop improving. Relaxed iterates are
/// tested against both marginals.
fn solve_log_domain(
    sub: &SubProblem,
    gamma: f64,
    max_cost: f64,
    options: &SinkhornOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let (m, n) = (sub.m, sub.n);
    // Row-major copy for the row (f) update.
    let mut cost_t = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            cost_t[i * n + j] = sub.cost[j * m + i];
        }
    }
    let log_a: Vec<f64> = sub.a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = sub.b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut scratch = vec![0.0; m.max(n)];
    let mut row_lse = vec![0.0; m];
    let mut col_lse = vec![0.0; n];

    let mut schedule = Vec::new();
    let mut eps = max_cost.max(gamma);
    while eps > gamma {
        schedule.push(eps);
        eps *= SCHEDULE_FACTOR;
    }
    schedule.push(gamma);

    let mut used = 0;
    let stages = schedule.len();
    for (s, &eps) in schedule.iter().enumerate() {
        let last = s + 1 == stages;
        let remaining = options.max_iterations.saturating_sub(used).max(1);
        let (tol, cap) = if last {
            (options.tolerance, remaining)
        } else {
            (STAGE_TOLERANCE.max(options.tolerance), STAGE_MAX_ITERATIONS.min(remaining))
        };
        let mut relax = Relaxation::new(last);
        let mut newton = last && m + n <= NEWTON_MAX_ATOMS;
        let mut it = 0;
        loop {
            lse_rows(&cost_t, n, &g, eps, &mut row_lse, &mut scratch);
            let mut residual = (0..m)
                .map(|i| ((f[i] / eps + row_lse[i]).exp() - sub.a[i]).abs())
                .fold(0.0, f64::max);
            if relax.columns_stale {
                lse_cols(sub, &f, eps, &mut col_lse, &mut scratch);
                let col_res = (0..n)
                    .map(|j| ((g[j] / eps + col_lse[j]).exp() - sub.b[j]).abs())
                    .fold(0.0, f64::max);
                residual = residual.max(col_res);
            }
            if !residual.is_finite() && relax.omega == 1.0 {
                return Err(Error::NonFiniteKernel { gamma });
            }
            if it >= cap || (it > 0 && residual <= tol) {
                break;
            }
            if newton && it >= NEWTON_WARMUP {
                if newton_step(sub, eps, &mut f, &mut g, residual) {
                    relax.columns_stale = true;
                    it += 1;
                    continue;
                }
                newton = false;
            }
            if relax.observe(residual, &mut f, &mut g) {
                // Restored the saved potentials; recompute before updating.
                continue;
            }
            let omega = relax.omega;
            for i in 0..m {
                let target = eps * (log_a[i] - row_lse[i]);
                f[i] = if omega == 1.0 { target } else { (1.0 - omega) * f[i] + omega * target };
            }
            lse_cols(sub, &f, eps, &mut col_lse, &mut scratch);
            for j in 0..n {
                let target = eps * (log_b[j] - col_lse[j]);
                g[j] = if omega == 1.0 { target } else { (1.0 - omega) * g[j] + omega * target };
            }
            relax.columns_stale = omega != 1.0;
            it += 1;
            if f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteKernel { gamma });
            }
        }
        used += it;
    }
    Ok((f, g, used))
}

/// Plain iterations observed before the rate is estimated.
const RELAX_WARMUP: usize = 100;
/// Window (in iterations) of the rate estimate.
const RELAX_WINDOW: usize = 50;
/// Rates below this converge fast enough without relaxation.
const RELAX_MIN_RATE: f64 = 0.9;
const RELAX_MAX_OMEGA: f64 = 1.95;
/// Relaxed iterations allowed before the residual must beat the one at the
/// switch.
const RELAX_PATIENCE: usize = 500;

/// Over-relaxation controller for the final log-domain stage.
struct Relaxation {
    enabled: bool,
    omega: f64,
    history: Vec<f64>,
    saved: Option<(Vec<f64>, Vec<f64>, f64)>,
    relaxed_steps: usize,
    best: f64,
    /// The last g update was relaxed, so column sums are not exact.
    columns_stale: bool,
}

impl Relaxation {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            omega: 1.0,
            history: Vec::new(),
            saved: None,
            relaxed_steps: 0,
            best: f64::INFINITY,
            columns_stale: false,
        }
    }

    /// Records the residual of the current iterate. Returns true when the
    /// relaxed run was abandoned and `f`, `g` were reset to the saved plain
    /// iterate.
    fn observe(&mut self, residual: f64, f: &mut Vec<f64>, g: &mut Vec<f64>) -> bool {
        if !self.enabled {
            return false;
        }
        if self.omega == 1.0 {
            self.history.push(residual);
            let k = self.history.len();
            if k > RELAX_WARMUP {
                let rate = (self.history[k - 1] / self.history[k - 1 - RELAX_WINDOW]).powf(1.0 / RELAX_WINDOW as f64);
                if rate.is_finite() && rate > RELAX_MIN_RATE && rate < 1.0 {
                    self.omega = (2.0 / (1.0 + (1.0 - rate).sqrt())).min(RELAX_MAX_OMEGA);
                    self.saved = Some((f.clone(), g.clone(), residual));
                    self.best = residual;
                }
            }
            return false;
        }
        self.relaxed_steps += 1;
        let (_, _, at_switch) = self.saved.as_ref().expect("saved when relaxation starts");
        let stalled = self.relaxed_steps >= RELAX_PATIENCE && self.best >= *at_switch;
        if residual.is_finite() {
            self.best = self.best.min(residual);
        }
        if !residual.is_finite() || residual > 1e3 * at_switch || stalled {
            let (sf, sg, _) = self.saved.take().expect("saved when relaxation starts");
            *f = sf;
            *g = sg;
            self.omega = 1.0;
            self.enabled = false;
            self.columns_stale = false;
            return true;
        }
        false
    }
}

/// Problems with at most this many atoms (rows plus columns) finish the last
/// stage with Newton steps on the dual.
const NEWTON_MAX_ATOMS: usize = 512;
/// Plain iterations of the last stage before the first Newton step.
const NEWTON_WARMUP: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 30;
/// Eigenvalues of the reduced Newton system below this fraction of the
/// largest are treated as zero.
const NEWTON_EIGEN_CUTOFF: f64 = 1e-12;
/// Largest change of any potential in one Newton step, in units of `eps`.
const NEWTON_MAX_STEP: f64 = 1.0;
/// Sufficient-increase constant of the line search on the dual objective.
const NEWTON_ARMIJO: f64 = 1e-4;

/// One damped Newton step on the dual potentials at regularization `eps`.
///
/// Solves `[[diag(r), P], [Pᵀ, diag(c)]] (δf, δg) = eps (a − r, b − c)` with
/// `P` the current plan and `r`, `c` its row and column sums. `δf` is
/// eliminated and the remaining symmetric system for `δg` is solved by
/// pseudo-inverse, which discards the constant shift and any decoupled
/// blocks of the plan. The step is first
/// shortened so no potential moves by more than `NEWTON_MAX_STEP · eps`, then
/// halved until it either lowers the marginal residual below `residual` or raises
/// the dual objective by a sufficient amount. Returns false, leaving
/// `f` and `g` untouched, if no step helps.
fn newton_step(sub: &SubProblem, eps: f64, f: &mut [f64], g: &mut [f64], residual: f64) -> bool {
    let (m, n) = (sub.m, sub.n);
    let plan = DMatrix::from_fn(m, n, |i, j| ((f[i] + g[j] - sub.cost[j * m + i]) / eps).exp());
    let r = plan.column_sum();
    let c = plan.row_sum().transpose();
    if r.iter().chain(c.iter()).any(|x| !(x.is_finite() && *x > 0.0)) {
        return false;
    }
    let da = DVector::from_fn(m, |i, _| eps * (sub.a[i] - r[i]));
    let db = DVector::from_fn(n, |j, _| eps * (sub.b[j] - c[j]));
    let scaled = DMatrix::from_fn(m, n, |i, j| plan[(i, j)] / r[i]);
    let schur = symmetrize(&(DMatrix::from_diagonal(&c) - plan.transpose() * &scaled));
    let rhs = &db - scaled.transpose() * &da;
    let eig = schur.symmetric_eigen();
    let cutoff = NEWTON_EIGEN_CUTOFF * eig.eigenvalues.amax();
    let projected = eig.eigenvectors.transpose() * rhs;
    let inverted = DVector::from_fn(n, |k, _| {
        let lambda = eig.eigenvalues[k];
        if lambda > cutoff {
            projected[k] / lambda
        } else {
            0.0
        }
    });
    let dg = &eig.eigenvectors * inverted;
    let df = DVector::from_fn(m, |i, _| (da[i] - (plan.row(i) * &dg)[0]) / r[i]);
    if df.iter().chain(dg.iter()).any(|x| !x.is_finite()) {
        return false;
    }
    let slope = (da.dot(&df) + db.dot(&dg)) / eps;
    let (dual, _) = dual_and_residual(sub, eps, f, g);
    let mut t = (NEWTON_MAX_STEP * eps / df.amax().max(dg.amax())).min(1.0);
    for _ in 0..NEWTON_MAX_HALVINGS {
        let nf: Vec<f64> = (0..m).map(|i| f[i] + t * df[i]).collect();
        let ng: Vec<f64> = (0..n).map(|j| g[j] + t * dg[j]).collect();
        let (next_dual, next_residual) = dual_and_residual(sub, eps, &nf, &ng);
        if next_residual < residual || next_dual >= dual + NEWTON_ARMIJO * t * slope {
            f.copy_from_slice(&nf);
            g.copy_from_slice(&ng);
            return true;
        }
        t *= 0.5;
    }
    false
}

/// Dual objective `⟨a, f⟩ + ⟨b, g⟩ − eps Σ u_ij` and the largest violation of
/// either marginal by the plan `u` of `f`, `g`. A plan that overflows gives
/// `(−∞, ∞)`.
fn dual_and_residual(sub: &SubProblem, eps: f64, f: &[f64], g: &[f64]) -> (f64, f64) {
    let m = sub.m;
    let mut cols = vec![0.0; sub.n];
    let mut rows = vec![0.0; m];
    for (j, cj) in cols.iter_mut().enumerate() {
        let col = &sub.cost[j * m..(j + 1) * m];
        for i in 0..m {
            let u = ((f[i] + g[j] - col[i]) / eps).exp();
            *cj += u;
            rows[i] += u;
        }
    }
    let worst = |sums: &[f64], target: &[f64]| {
        sums.iter().zip(target).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max)
    };
    let residual = worst(&rows, &sub.a).max(worst(&cols, &sub.b));
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let dual = dot(&sub.a, f) + dot(&sub.b, g) - eps * rows.iter().sum::<f64>();
    if residual.is_finite() && dual.is_finite() {
        (dual, residual)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

fn lse_rows(cost_t: &[f64], n: usize, g: &[f64], eps: f64, out: &mut [f64], scratch: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = &cost_t[i * n..(i + 1) * n];
        for j in 0..n {
            scratch[j] = (g[j] - row[j]) / eps;
        }
        *o = log_sum_exp(&scratch[..n]);
    }
}

fn lse_cols(sub: &SubProblem, f: &[f64], eps: f64, out: &mut [f64], scratch: &mut [f64]) {
    let m = sub.m;
    for (j, o) in out.iter_mut().enumerate() {
        let col = &sub.cost[j * m..(j + 1) * m];
        for i in 0..m {
            scratch[i] = (f[i] - col[i]) / eps;
        }
        *o = log_sum_exp(&scratch[..m]);
    }
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
