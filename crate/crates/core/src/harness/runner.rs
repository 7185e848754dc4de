use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::metrics::{compute_metrics, MetricSeries};
use super::output::{write_replicate, write_summary, Summary};
use crate::assimilation::{
    run_assimilation_cycle, AssimilatorConfig, CycleDiagnostics, ForecastState, Method, MethodStreams,
};
use crate::dynamics::{make_truth_trajectory, synthesize_observation, Observation, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamRole};

/// One assimilator's record within one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub label: String,
    pub method: Method,
    /// Analysis means, one per completed cycle.
    pub means: Vec<DVector<f64>>,
    /// Per-component ensemble standard deviation after each analysis.
    pub spreads: Vec<DVector<f64>>,
    /// Analysis members per cycle, kept only for small states.
    pub members: Option<Vec<DMatrix<f64>>>,
    pub diagnostics: Vec<CycleDiagnostics>,
    pub metrics: Option<MetricSeries>,
    pub error: Option<String>,
}

/// Everything one replicate produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRun {
    pub replicate: usize,
    /// Model step index of every analysis.
    pub cycle_steps: Vec<usize>,
    pub truth: Trajectory,
    pub observations: Vec<Observation>,
    /// SHA-256 over the truth and observation values every method consumed.
    pub observation_digest: String,
    pub methods: Vec<MethodRun>,
}

impl ReplicateRun {
    pub fn cycle_times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.time).collect()
    }

    pub fn truth_at_cycles(&self) -> Vec<DVector<f64>> {
        self.cycle_steps.iter().map(|&s| self.truth.at(s).clone()).collect()
    }

    pub fn method(&self, label: &str) -> Option<&MethodRun> {
        self.methods.iter().find(|m| m.label == label)
    }
}

/// Runs replicate `replicate` of `cfg` in memory.
///
/// The truth and the observation sequence are generated once and shared by
/// every assimilator. A failing assimilator is recorded in its `MethodRun`;
/// the others still run.
pub fn run_replicate(cfg: &ExperimentConfig, replicate: usize) -> Result<ReplicateRun> {
    let spec = &cfg.dynamics;
    let rep = replicate as u64;
    let truth = make_truth_trajectory(spec, cfg.horizon)?;
    let cycle_steps: Vec<usize> = (1..=cfg.cycles()?).map(|c| c * cfg.interval).collect();
    let mut obs_rng = stream(cfg.base_seed, rep, StreamRole::ObservationNoise);
    let observations = cycle_steps
        .iter()
        .map(|&s| synthesize_observation(spec, truth.at(s), truth.time(s), &mut obs_rng))
        .collect::<Result<Vec<_>>>()?;

    let mut hasher = Sha256::new();
    for (&s, o) in cycle_steps.iter().zip(&observations) {
        for v in truth.at(s).iter().chain(o.y.iter()) {
            hasher.update(v.to_le_bytes());
        }
    }
    let observation_digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

    let truth_at: Vec<DVector<f64>> = cycle_steps.iter().map(|&s| truth.at(s).clone()).collect();
    let methods = cfg
        .assimilators
        .iter()
        .map(|a| run_method(cfg, a, replicate, &observations, &truth_at))
        .collect();
    Ok(ReplicateRun { replicate, cycle_steps, truth, observations, observation_digest, methods })
}

fn run_method(
    cfg: &ExperimentConfig,
    a: &AssimilatorConfig,
    replicate: usize,
    observations: &[Observation],
    truth_at: &[DVector<f64>],
) -> MethodRun {
    let mut run = MethodRun {
        label: a.label.clone(),
        method: a.method,
        means: Vec::new(),
        spreads: Vec::new(),
        members: (cfg.dynamics.state_dim() <= cfg.members_dump_max_dim).then(Vec::new),
        diagnostics: Vec::new(),
        metrics: None,
        error: None,
    };
    if let Err(e) = cycle_method(cfg, a, replicate, observations, &mut run) {
        warn!("replicate {replicate}, {}: {e}", a.label);
        run.error = Some(e.to_string());
        return run;
    }
    match compute_metrics(&run.means, truth_at, cfg.metrics.bias_mode) {
        Ok(m) => run.metrics = Some(m),
        Err(e) => run.error = Some(e.to_string()),
    }
    run
}

fn cycle_method(
    cfg: &ExperimentConfig,
    a: &AssimilatorConfig,
    replicate: usize,
    observations: &[Observation],
    run: &mut MethodRun,
) -> Result<()> {
    let spec = &cfg.dynamics;
    let rep = replicate as u64;
    let model = spec.forecast_model()?;
    let mut streams = MethodStreams::for_method(cfg.base_seed, rep, &a.label);
    let mut state = if a.method.is_ensemble() {
        let mut init_rng = stream(cfg.base_seed, rep, StreamRole::InitialEnsemble);
        ForecastState::Ensemble(spec.initial_ensemble(a.ensemble_size, &mut init_rng)?)
    } else {
        ForecastState::Single { state: spec.initial_background()?, time: 0.0 }
    };
    for obs in observations {
        let result =
            run_assimilation_cycle(&state, &model, spec.model_noise(), cfg.interval, obs, a, &mut streams)?;
        if result.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("analysis mean became non-finite at t = {}", obs.time)));
        }
        run.means.push(result.mean.clone());
        run.spreads.push(result.ensemble.spread());
        if let Some(members) = run.members.as_mut() {
            members.push(result.ensemble.members.clone());
        }
        run.diagnostics.push(result.diagnostics.clone());
        state = ForecastState::from_analysis(&result, a.method);
    }
    Ok(())
}

/// What [`run_experiment`] wrote and how many (replicate, method) pairs failed.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub summary: Summary,
    pub failures: usize,
}

/// Runs every replicate (in parallel), writes the per-replicate CSVs and the
/// JSON summary, and reports failures without aborting the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_in(cfg, &cfg.resolved_output_dir())
}

/// [`run_experiment`] writing into `dir` regardless of the configuration.
pub fn run_experiment_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let dir = dir.to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let work = || -> Vec<Result<ReplicateRun>> {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let run = run_replicate(cfg, r)?;
                write_replicate(&dir, cfg, &run)?;
                info!("replicate {r} done");
                Ok(run)
            })
            .collect()
    };
    let outcomes = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    };
    let summary = Summary::build(cfg, &outcomes)?;
    write_summary(&dir, &summary)?;
    let failures = summary.failures.len();
    Ok(RunReport { output_dir: dir, summary, failures })
}
