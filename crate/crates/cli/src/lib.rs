//! The `enrda` command line.
//!
//! The run summary lists, per assimilator, the across-replicate means of the
//! temporal bias and ubrmse and of the per-snapshot (spatial) statistics
//! averaged over snapshots.
//!
//! Exit codes: 0 on success, 1 when a run fails or any assimilator failed in
//! any replicate, 2 for configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use enrda_core::harness::{preset, run_experiment_in, run_ot_demo, RunReport, PRESET_NAMES};
use enrda_core::{Error, ExperimentConfig};
use log::error;

#[derive(Debug, Parser)]
#[command(name = "enrda", version, about = "Ensemble Riemannian data assimilation twin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the file and ENRDA_OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in experiments.
    Preset {
        #[arg(value_parser = PRESET_NAMES)]
        name: String,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the preset's configuration as TOML to stdout instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
    /// Write the optimal-transport illustration data.
    OtDemo {
        #[arg(long, default_value = "output/ot_demo")]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        1
    }
}

fn report(r: &RunReport) -> i32 {
    println!("results written to {}", r.output_dir.display());
    println!(
        "{:<24} {:>4} {:>10} {:>10} {:>12} {:>12}",
        "assimilator", "ok", "bias", "ubrmse", "snap_bias", "snap_ubrmse"
    );
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for a in &r.summary.aggregate {
        let [b, u, sb, su] = a.metrics.as_ref().map_or([f64::NAN; 4], |m| {
            [m.bias, m.ubrmse, mean(&m.per_cycle_bias), mean(&m.per_cycle_ubrmse)]
        });
        println!("{:<24} {:>4} {:>10.5} {:>10.5} {:>12.5} {:>12.5}", a.label, a.replicates_ok, b, u, sb, su);
    }
    for f in &r.summary.failures {
        eprintln!("replicate {} {}: {}", f.replicate, f.label.as_deref().unwrap_or("(all)"), f.error);
    }
    if r.failures > 0 {
        1
    } else {
        0
    }
}

fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> i32 {
    let dir = out.map_or_else(|| cfg.resolved_output_dir(), Path::to_path_buf);
    match run_experiment_in(cfg, &dir) {
        Ok(r) => report(&r),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_file(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Command::Run { config, out } => match load(&config) {
            Ok(cfg) => run(&cfg, out.as_deref()),
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Preset { name, replicates, seed, out, print_config } => {
            let Some(mut cfg) = preset(&name, replicates, seed) else {
                eprintln!("error: unknown preset '{name}'");
                return 2;
            };
            if let Some(dir) = &out {
                cfg.output_dir = Some(dir.clone());
            }
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
            if print_config {
                return match cfg.to_toml_string() {
                    Ok(s) => {
                        print!("{s}");
                        0
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        1
                    }
                };
            }
            run(&cfg, out.as_deref())
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!(
                    "{}: ok ({} assimilators, {} replicates, state dimension {})",
                    config.display(),
                    cfg.assimilators.len(),
                    cfg.replicates,
                    cfg.dynamics.state_dim()
                );
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::OtDemo { out } => match run_ot_demo(&out) {
            Ok(demo) => {
                println!("results written to {}", out.display());
                for c in &demo.couplings {
                    println!("gamma {:>6}: entropy {:.4}, cost {:.4}", c.gamma, c.entropy, c.transport_cost);
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    }
}
