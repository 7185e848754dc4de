use enrda_core::harness::{preset, run_experiment_in, run_replicate, PRESET_NAMES, SCHEMA_VERSION};
use enrda_core::ExperimentConfig;

fn small_lorenz(replicates: usize) -> ExperimentConfig {
    let mut cfg = preset("lorenz63", replicates, 3).unwrap();
    cfg.horizon = 2.0;
    for a in &mut cfg.assimilators {
        a.ensemble_size = 20;
    }
    cfg
}

#[test]
fn every_method_sees_the_same_truth_and_observations() {
    let cfg = small_lorenz(1);
    let run = run_replicate(&cfg, 0).unwrap();
    let mut alone = cfg.clone();
    alone.assimilators.retain(|a| a.label == "enkf");
    let solo = run_replicate(&alone, 0).unwrap();
    assert_eq!(run.observation_digest, solo.observation_digest);
    assert_eq!(run.truth, solo.truth);
    // A method's streams do not depend on which other methods run.
    assert_eq!(run.method("enkf").unwrap().means, solo.method("enkf").unwrap().means);
    let other = run_replicate(&cfg, 1).unwrap();
    assert_ne!(run.observation_digest, other.observation_digest);
}

#[test]
fn replicates_are_reproducible() {
    let cfg = small_lorenz(1);
    assert_eq!(run_replicate(&cfg, 0).unwrap(), run_replicate(&cfg, 0).unwrap());
}

#[test]
fn aggregate_is_the_mean_of_replicates() {
    let cfg = small_lorenz(3);
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment_in(&cfg, dir.path()).unwrap();
    let summary = &report.summary;
    for agg in &summary.aggregate {
        let per: Vec<_> = summary
            .replicates
            .iter()
            .filter_map(|r| r.methods.iter().find(|m| m.label == agg.label)?.metrics.as_ref())
            .collect();
        assert_eq!(per.len(), agg.replicates_ok);
        let m = agg.metrics.as_ref().unwrap();
        let mean = |f: fn(&enrda_core::MetricSeries) -> f64| per.iter().map(|s| f(s)).sum::<f64>() / per.len() as f64;
        assert!((m.bias - mean(|s| s.bias)).abs() <= 1e-12);
        assert!((m.ubrmse - mean(|s| s.ubrmse)).abs() <= 1e-12);
        for k in 0..m.per_cycle_ubrmse.len() {
            let avg = per.iter().map(|s| s.per_cycle_ubrmse[k]).sum::<f64>() / per.len() as f64;
            assert!((m.per_cycle_ubrmse[k] - avg).abs() <= 1e-12);
        }
    }
}

#[test]
fn outputs_carry_schema_and_fixed_columns() {
    let cfg = small_lorenz(1);
    let dir = tempfile::tempdir().unwrap();
    run_experiment_in(&cfg, dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], SCHEMA_VERSION);
    assert_eq!(summary["name"], "lorenz63");
    let states = std::fs::read_to_string(dir.path().join("states_rep000.csv")).unwrap();
    assert!(states.starts_with("time,dim,truth,obs,method,analysis_mean,spread"));
    assert_eq!(states.lines().nth(1).unwrap().split(',').count(), 7);
}

#[test]
fn preset_configs_round_trip_through_toml() {
    for name in PRESET_NAMES {
        let cfg = preset(name, 4, 11).unwrap();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg, "{name}");
    }
}

#[test]
fn out_of_range_eta_names_the_field() {
    let mut cfg = small_lorenz(1);
    cfg.assimilators[0].eta = enrda_core::EtaPolicy::Fixed { value: 1.5 };
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("eta"), "{err}");
}
