//! Linear advection-diffusion with constant coefficients on a regular grid.
//!
//! One step of length `dt` is the exact solution operator: translation by
//! `a·dt` followed by a Gaussian blur of variance `2·D·dt` per axis. Both are
//! applied as Fourier multipliers along each axis of a zero-padded copy of the
//! field, and the padding is cropped again afterwards so mass that leaves the
//! domain is lost rather than wrapped around.
//!
//! Field values are cell masses: a unit point mass is a single cell holding 1.

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvectionDiffusionParams {
    /// Advection velocity per axis.
    pub velocity: Vec<f64>,
    /// Diagonal of the diffusivity tensor.
    pub diffusivity: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Domain length per axis; the grid covers `(0, extent]`.
    pub extent: Vec<f64>,
    pub dt: f64,
}

impl AdvectionDiffusionParams {
    pub fn ndim(&self) -> usize {
        self.spacing.len()
    }

    /// Number of cells per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.extent
            .iter()
            .zip(&self.spacing)
            .map(|(l, h)| (l / h).round() as usize)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let n = self.ndim();
        if !(1..=2).contains(&n) {
            return Err(Error::invalid(format!("{field}.spacing"), "grid must be 1-D or 2-D"));
        }
        for (name, len) in [
            ("velocity", self.velocity.len()),
            ("diffusivity", self.diffusivity.len()),
            ("extent", self.extent.len()),
        ] {
            if len != n {
                return Err(Error::invalid(
                    format!("{field}.{name}"),
                    format!("has {len} entries, grid has {n} axes"),
                ));
            }
        }
        if self.diffusivity.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid(format!("{field}.diffusivity"), "entries must be >= 0"));
        }
        if self.velocity.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{field}.velocity"), "must be finite"));
        }
        if self.spacing.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::invalid(format!("{field}.spacing"), "must be positive"));
        }
        for (l, h) in self.extent.iter().zip(&self.spacing) {
            let cells = l / h;
            if !(cells >= 1.0 && (cells - cells.round()).abs() < 1e-9 * cells) {
                return Err(Error::invalid(
                    format!("{field}.extent"),
                    format!("{l} is not a positive multiple of the spacing {h}"),
                ));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("{field}.dt"), "must be positive"));
        }
        Ok(())
    }
}

/// A scalar field on the regular grid `s_k = (k + 1)·Δs`, stored row-major
/// (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>, shape: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if shape.len() != spacing.len() || shape.is_empty() {
            return Err(Error::DimensionMismatch("shape and spacing differ in length".into()));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not fill a grid of shape {shape:?}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field", "values must be finite"));
        }
        Ok(Self { values, shape, spacing })
    }

    pub fn zeros(p: &AdvectionDiffusionParams) -> Self {
        Self { values: vec![0.0; p.len()], shape: p.shape(), spacing: p.spacing.clone() }
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        self.shape
            .iter()
            .zip(&self.spacing)
            .map(|(&n, &h)| (1..=n).map(|k| k as f64 * h).collect())
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mean and variance of the field along `axis`, treating it as a mass
    /// distribution.
    pub fn moments(&self, axis: usize) -> (f64, f64) {
        let coords = &self.axes()[axis];
        let stride: usize = self.shape[axis + 1..].iter().product();
        let n = self.shape[axis];
        let mut marginal = vec![0.0; n];
        for (idx, v) in self.values.iter().enumerate() {
            marginal[(idx / stride) % n] += v;
        }
        let mass: f64 = marginal.iter().sum();
        let mean = marginal.iter().zip(coords).map(|(m, s)| m * s).sum::<f64>() / mass;
        let var = marginal.iter().zip(coords).map(|(m, s)| m * (s - mean).powi(2)).sum::<f64>() / mass;
        (mean, var)
    }
}

/// Per-axis Fourier propagator for a fixed grid and parameter set. Plans and
/// multipliers are built once and reused for every step.
#[derive(Clone)]
pub struct SpectralPropagator {
    shape: Vec<usize>,
    axes: Vec<AxisPropagator>,
}

#[derive(Clone)]
struct AxisPropagator {
    n: usize,
    pad: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    multiplier: Vec<Complex<f64>>,
}

impl std::fmt::Debug for SpectralPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPropagator")
            .field("shape", &self.shape)
            .field("pads", &self.axes.iter().map(|a| a.pad).collect::<Vec<_>>())
            .finish()
    }
}

impl SpectralPropagator {
    pub fn new(p: &AdvectionDiffusionParams) -> Result<Self> {
        p.validate("dynamics")?;
        let shape = p.shape();
        let mut planner = FftPlanner::new();
        let axes = (0..p.ndim())
            .map(|k| {
                AxisPropagator::new(
                    &mut planner,
                    shape[k],
                    p.spacing[k],
                    p.velocity[k],
                    p.diffusivity[k],
                    p.dt,
                )
            })
            .collect();
        Ok(Self { shape, axes })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Advances `values` (row-major, this propagator's shape) by one step.
    pub fn step(&self, values: &mut [f64]) {
        debug_assert_eq!(values.len(), self.len());
        for (axis, prop) in self.axes.iter().enumerate() {
            let stride: usize = self.shape[axis + 1..].iter().product();
            let outer: usize = self.shape[..axis].iter().product();
            let len = prop.n + 2 * prop.pad;
            let mut line = vec![Complex::new(0.0, 0.0); len];
            let mut scratch = vec![
                Complex::new(0.0, 0.0);
                prop.forward.get_inplace_scratch_len().max(prop.inverse.get_inplace_scratch_len())
            ];
            let block = prop.n * stride;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * block + s;
                    line.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                    for k in 0..prop.n {
                        line[prop.pad + k].re = values[base + k * stride];
                    }
                    prop.apply(&mut line, &mut scratch);
                    for k in 0..prop.n {
                        values[base + k * stride] = line[prop.pad + k].re;
                    }
                }
            }
        }
    }
}

impl AxisPropagator {
    fn new(planner: &mut FftPlanner<f64>, n: usize, h: f64, a: f64, d: f64, dt: f64) -> Self {
        let sigma = (2.0 * d * dt).sqrt();
        if d > 0.0 && sigma < 0.1 * h {
            warn!("diffusion kernel std {sigma:.3e} is below a tenth of the grid spacing {h}");
        }
        let reach = sigma.max(a.abs() * dt);
        let pad = ((4.0 * reach / h).ceil() as usize + 2).max(8);
        let len = n + 2 * pad;
        let shift = a * dt;
        let multiplier = (0..len)
            .map(|k| {
                let j = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
                let omega = 2.0 * PI * j / (len as f64 * h);
                let damping = (-d * dt * omega * omega).exp() / len as f64;
                if len % 2 == 0 && k == len / 2 {
                    // The Nyquist mode must stay real for a real output.
                    Complex::new(damping * (omega * shift).cos(), 0.0)
                } else {
                    Complex::from_polar(damping, -omega * shift)
                }
            })
            .collect();
        Self {
            n,
            pad,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            multiplier,
        }
    }

    fn apply(&self, line: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        self.forward.process_with_scratch(line, scratch);
        for (c, m) in line.iter_mut().zip(&self.multiplier) {
            *c *= m;
        }
        self.inverse.process_with_scratch(line, scratch);
    }
}

/// Advances `field` by one step of `p.dt`.
pub fn advect_diffuse_step(field: &GridField, p: &AdvectionDiffusionParams) -> Result<GridField> {
    if field.shape != p.shape() {
        return Err(Error::DimensionMismatch(format!(
            "field shape {:?} does not match the grid {:?}",
            field.shape,
            p.shape()
        )));
    }
    let prop = SpectralPropagator::new(p)?;
    let mut out = field.clone();
    prop.step(&mut out.values);
    Ok(out)
}

/// A point mass released at `position` and evolved for `age` time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSource {
    pub mass: f64,
    pub age: f64,
    #[serde(default)]
    pub position: Vec<f64>,
}

/// Exact cell masses of the Green's function for a set of point sources
/// after each has evolved for `age + elapsed` under `p`.
///
/// Each cell receives `mass · Δs · pdf` per axis, the midpoint value of the
/// Gaussian density.
pub fn green_function_field(
    sources: &[PointSource],
    elapsed: f64,
    p: &AdvectionDiffusionParams,
) -> Result<GridField> {
    p.validate("dynamics")?;
    let mut field = GridField::zeros(p);
    let axes = field.axes();
    let ndim = p.ndim();
    for src in sources {
        let t = src.age + elapsed;
        let origin = |k: usize| src.position.get(k).copied().unwrap_or(0.0);
        let profiles: Vec<Vec<f64>> = (0..ndim)
            .map(|k| {
                let var = 2.0 * p.diffusivity[k] * t;
                let centre = origin(k) + p.velocity[k] * t;
                let h = p.spacing[k];
                axes[k]
                    .iter()
                    .map(|&s| {
                        if var > 0.0 {
                            h * (-(s - centre).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
                        } else if (s - centre).abs() < 0.5 * h {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        match ndim {
            1 => {
                for (v, g) in field.values.iter_mut().zip(&profiles[0]) {
                    *v += src.mass * g;
                }
            }
            _ => {
                let n1 = field.shape[1];
                for (idx, v) in field.values.iter_mut().enumerate() {
                    *v += src.mass * profiles[0][idx / n1] * profiles[1][idx % n1];
                }
            }
        }
    }
    Ok(field)
}

/// Averages over `block × block` cells (per axis) and writes the average back
/// to every cell of the block: a coarse sensor resolved on the model grid.
/// Trailing cells that do not fill a block are averaged over what exists.
pub fn box_average(field: &GridField, block: usize) -> GridField {
    let mut out = field.clone();
    if block <= 1 {
        return out;
    }
    match field.shape.len() {
        1 => {
            for chunk in out.values.chunks_mut(block) {
                let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
                chunk.iter_mut().for_each(|v| *v = mean);
            }
        }
        _ => {
            let (n0, n1) = (field.shape[0], field.shape[1]);
            for b0 in (0..n0).step_by(block) {
                for b1 in (0..n1).step_by(block) {
                    let rows = b0..(b0 + block).min(n0);
                    let cols = b1..(b1 + block).min(n1);
                    let count = rows.len() * cols.len();
                    let mut sum = 0.0;
                    for i in rows.clone() {
                        for j in cols.clone() {
                            sum += field.values[i * n1 + j];
                        }
                    }
                    for i in rows.clone() {
                        for j in cols.clone() {
                            out.values[i * n1 + j] = sum / count as f64;
                        }
                    }
                }
            }
        }
    }
    out
}
