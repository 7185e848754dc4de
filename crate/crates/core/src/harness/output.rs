//! On-disk results of an experiment.
//!
//! Per replicate `r` (zero-padded to three digits):
//! - `states_rep{r}.csv`: `time,dim,truth,obs,method,analysis_mean,spread`,
//!   one row per cycle, component and assimilator;
//! - `metrics_rep{r}.csv`: `method,scope,index,bias,ubrmse` where scope is
//!   `dimension`, `cycle` or `overall`;
//! - `diagnostics_rep{r}.csv`: one row per cycle and assimilator;
//! - `members_rep{r}.csv`: `time,method,member,dim,value`, small states only.
//!
//! `summary.json` holds the configuration echo, per-replicate metrics, the
//! across-replicate aggregates and the failures. Files carry no timestamps, so
//! reruns with the same configuration are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::metrics::{BiasMode, MetricSeries};
use super::runner::ReplicateRun;
use crate::assimilation::{CycleDiagnostics, Method};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the CSV files of one replicate into `dir`.
pub fn write_replicate(dir: &Path, cfg: &ExperimentConfig, run: &ReplicateRun) -> Result<()> {
    let tag = format!("rep{:03}", run.replicate);
    let truth = run.truth_at_cycles();

    let mut s = String::from("time,dim,truth,obs,method,analysis_mean,spread\n");
    for (c, obs) in run.observations.iter().enumerate() {
        for d in 0..obs.y.len() {
            for m in &run.methods {
                let (mean, spread) = match (m.means.get(c), m.spreads.get(c)) {
                    (Some(a), Some(sp)) => (a[d].to_string(), sp[d].to_string()),
                    _ => (String::new(), String::new()),
                };
                writeln!(s, "{},{},{},{},{},{},{}", obs.time, d, truth[c][d], obs.y[d], m.label, mean, spread)
                    .unwrap();
            }
        }
    }
    write_file(&dir.join(format!("states_{tag}.csv")), &s)?;

    let mut s = String::from("method,scope,index,bias,ubrmse\n");
    for m in &run.methods {
        let Some(ms) = &m.metrics else { continue };
        for (d, (b, u)) in ms.per_dimension_bias.iter().zip(&ms.per_dimension_ubrmse).enumerate() {
            writeln!(s, "{},dimension,{d},{b},{u}", m.label).unwrap();
        }
        for (c, (b, u)) in ms.per_cycle_bias.iter().zip(&ms.per_cycle_ubrmse).enumerate() {
            writeln!(s, "{},cycle,{c},{b},{u}", m.label).unwrap();
        }
        writeln!(s, "{},overall,,{},{}", m.label, ms.bias, ms.ubrmse).unwrap();
    }
    write_file(&dir.join(format!("metrics_{tag}.csv")), &s)?;

    let mut s = String::from(
        "time,method,eta,gamma,transport_cost,sinkhorn_iterations,marginal_residual,log_domain,\
         effective_sample_size,gain_norm,alpha\n",
    );
    for m in &run.methods {
        for d in &m.diagnostics {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                d.time,
                m.label,
                opt(d.eta),
                opt(d.gamma),
                opt(d.transport_cost),
                opt(d.sinkhorn_iterations),
                opt(d.marginal_residual),
                opt(d.log_domain),
                opt(d.effective_sample_size),
                opt(d.gain_norm),
                opt(d.alpha)
            )
            .unwrap();
        }
    }
    write_file(&dir.join(format!("diagnostics_{tag}.csv")), &s)?;

    if cfg.dynamics.state_dim() <= cfg.members_dump_max_dim {
        let mut s = String::from("time,method,member,dim,value\n");
        for m in &run.methods {
            let Some(members) = &m.members else { continue };
            for (c, mat) in members.iter().enumerate() {
                let t = run.observations[c].time;
                for k in 0..mat.ncols() {
                    for d in 0..mat.nrows() {
                        writeln!(s, "{t},{},{k},{d},{}", m.label, mat[(d, k)]).unwrap();
                    }
                }
            }
        }
        write_file(&dir.join(format!("members_{tag}.csv")), &s)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricDefinitions {
    pub bias_mode: BiasMode,
    pub bias: &'static str,
    pub ubrmse: &'static str,
    pub per_cycle: &'static str,
    pub aggregate: &'static str,
}

impl MetricDefinitions {
    fn new(bias_mode: BiasMode) -> Self {
        Self {
            bias_mode,
            bias: match bias_mode {
                BiasMode::AbsoluteMean => "|mean over cycles of (analysis - truth)|, averaged over components",
                BiasMode::MeanAbsolute => "mean over cycles of |analysis - truth|, averaged over components",
            },
            ubrmse: "population standard deviation over cycles of (analysis - truth), averaged over components",
            per_cycle: "the same statistics taken across components at a fixed cycle",
            aggregate: "arithmetic mean over the replicates in which the method succeeded",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub label: String,
    pub method: Method,
    pub metrics: Option<MetricSeries>,
    pub error: Option<String>,
    pub cycles_completed: usize,
    pub diagnostics: Vec<CycleDiagnostics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub observation_digest: String,
    pub methods: Vec<MethodSummary>,
}

/// Across-replicate means of every metric of one assimilator.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateSummary {
    pub label: String,
    pub method: Method,
    pub replicates_ok: usize,
    pub metrics: Option<MetricSeries>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub replicate: usize,
    /// Assimilator label, or `None` when the whole replicate failed.
    pub label: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub config: serde_json::Value,
    pub metric_definitions: MetricDefinitions,
    pub cycle_times: Vec<f64>,
    pub replicates: Vec<ReplicateSummary>,
    pub aggregate: Vec<AggregateSummary>,
    pub failures: Vec<Failure>,
}

fn mean_vec(rows: &[&Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..rows[0].len()).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect()
}

/// Elementwise mean of several metric series.
pub fn average_metrics(series: &[&MetricSeries]) -> Option<MetricSeries> {
    if series.is_empty() {
        return None;
    }
    let n = series.len() as f64;
    let pick = |f: fn(&MetricSeries) -> &Vec<f64>| mean_vec(&series.iter().map(|s| f(s)).collect::<Vec<_>>());
    Some(MetricSeries {
        per_dimension_bias: pick(|s| &s.per_dimension_bias),
        per_dimension_ubrmse: pick(|s| &s.per_dimension_ubrmse),
        per_cycle_bias: pick(|s| &s.per_cycle_bias),
        per_cycle_ubrmse: pick(|s| &s.per_cycle_ubrmse),
        bias: series.iter().map(|s| s.bias).sum::<f64>() / n,
        ubrmse: series.iter().map(|s| s.ubrmse).sum::<f64>() / n,
    })
}

impl Summary {
    pub fn build(cfg: &ExperimentConfig, outcomes: &[Result<ReplicateRun>]) -> Result<Self> {
        let config = serde_json::to_value(cfg).map_err(|e| Error::Serialization(e.to_string()))?;
        let mut failures = Vec::new();
        let mut replicates = Vec::new();
        let mut cycle_times = Vec::new();
        for (r, outcome) in outcomes.iter().enumerate() {
            match outcome {
                Err(e) => failures.push(Failure { replicate: r, label: None, error: e.to_string() }),
                Ok(run) => {
                    if cycle_times.is_empty() {
                        cycle_times = run.cycle_times();
                    }
                    for m in &run.methods {
                        if let Some(e) = &m.error {
                            failures.push(Failure { replicate: r, label: Some(m.label.clone()), error: e.clone() });
                        }
                    }
                    replicates.push(ReplicateSummary {
                        replicate: run.replicate,
                        observation_digest: run.observation_digest.clone(),
                        methods: run
                            .methods
                            .iter()
                            .map(|m| MethodSummary {
                                label: m.label.clone(),
                                method: m.method,
                                metrics: m.metrics.clone(),
                                error: m.error.clone(),
                                cycles_completed: m.means.len(),
                                diagnostics: m.diagnostics.clone(),
                            })
                            .collect(),
                    });
                }
            }
        }
        let aggregate = cfg
            .assimilators
            .iter()
            .map(|a| {
                let ok: Vec<&MetricSeries> = replicates
                    .iter()
                    .flat_map(|r| r.methods.iter().filter(|m| m.label == a.label))
                    .filter_map(|m| m.metrics.as_ref())
                    .collect();
                AggregateSummary {
                    label: a.label.clone(),
                    method: a.method,
                    replicates_ok: ok.len(),
                    metrics: average_metrics(&ok),
                }
            })
            .collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            name: cfg.name.clone(),
            config,
            metric_definitions: MetricDefinitions::new(cfg.metrics.bias_mode),
            cycle_times,
            replicates,
            aggregate,
            failures,
        })
    }

    pub fn aggregate_for(&self, label: &str) -> Option<&AggregateSummary> {
        self.aggregate.iter().find(|a| a.label == label)
    }
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Serialization(e.to_string()))?;
    write_file(&dir.join("summary.json"), &(text + "\n"))
}
