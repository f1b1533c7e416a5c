use std::collections::BTreeMap;
use std::fs;

use aslsl::experiment::{
    default_panels, emit_reports, mean_std, run_experiment, sweep_sensitivity, write_sensitivity_csv, AggregateRow,
    DataSource, ExperimentConfig, ExperimentReport, Param,
};
use aslsl::simulation::SyntheticSpec;

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        source: DataSource::Synthetic(SyntheticSpec::uniform(60, 2, 12, 2, 3, 0.1, seed)),
        missing_ratios: vec![0.1, 0.3],
        lambda: vec![1.0],
        eta: vec![0.1, 1.0],
        delta: vec![1.0],
        gamma: vec![2.0],
        trials: 3,
        base_seed: seed,
        max_iters: 40,
        mlknn_neighbors: 5,
        include_baseline: true,
        ..Default::default()
    }
}

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn empty_report_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&ExperimentReport::empty(), dir.path()).unwrap();
    for name in ["metrics.csv", "alpha.csv", "cells.csv", "trials.csv"] {
        let (header, rows) = read_csv(&dir.path().join(name));
        assert!(!header.is_empty(), "{name}");
        assert!(rows.is_empty(), "{name}");
    }
    let agg: Vec<AggregateRow> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("aggregate.json")).unwrap()).unwrap();
    assert!(agg.is_empty());
    assert_eq!(fs::read_dir(dir.path().join("convergence")).unwrap().count(), 0);
    assert_eq!(fs::read_dir(dir.path().join("ranking")).unwrap().count(), 0);
}

#[test]
fn aggregates_recompute_from_long_metrics() {
    let report = run_experiment(&small(2)).unwrap();
    assert!(report.failures.is_empty());
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&report, dir.path()).unwrap();

    let (header, rows) = read_csv(&dir.path().join("metrics.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (c_cell, c_var, c_metric, c_value) = (col("cell"), col("variant"), col("metric"), col("value"));
    let mut groups: BTreeMap<(usize, String, String), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((r[c_cell].parse().unwrap(), r[c_var].clone(), r[c_metric].clone()))
            .or_default()
            .push(r[c_value].parse().unwrap());
    }
    let agg: Vec<AggregateRow> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg.len(), groups.len());
    for a in &agg {
        let values = &groups[&(a.cell_index, a.variant.clone(), a.metric.clone())];
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((mean - a.mean).abs() <= 1e-12, "{a:?}");
        assert!((mean_std(values).1 - a.std).abs() <= 1e-12);
        assert_eq!(values.len(), a.count);
    }
    // 4 cells × 3 trials × 2 variants × 7 metric rows.
    assert_eq!(rows.len(), 4 * 3 * 2 * 7);
}

#[test]
fn convergence_files_have_one_row_per_sweep() {
    let report = run_experiment(&small(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&report, dir.path()).unwrap();
    for t in &report.trials {
        let path = dir
            .path()
            .join(format!("convergence/cell{}_trial{}.csv", t.cell_index, t.trial));
        let (header, rows) = read_csv(&path);
        assert_eq!(rows.len(), t.traces[0].iterations_run);
        assert_eq!(header.len(), 2 + 2 * 2);
        let (_, ranking) = read_csv(
            &dir.path()
                .join(format!("ranking/cell{}_trial{}.csv", t.cell_index, t.trial)),
        );
        assert_eq!(ranking.len(), 24);
    }
    let (_, alpha) = read_csv(&dir.path().join("alpha.csv"));
    assert_eq!(alpha.len(), report.trials.len() * 2);
}

#[test]
fn independent_view_ablation_writes_a_trace_per_view() {
    let mut cfg = small(6);
    cfg.missing_ratios = vec![0.2];
    cfg.eta = vec![1.0];
    cfg.trials = 1;
    cfg.ablation.disable_shared_latent = true;
    let report = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&report, dir.path()).unwrap();
    for v in 0..2 {
        let (_, rows) = read_csv(&dir.path().join(format!("convergence/cell0_trial0_view{v}.csv")));
        assert_eq!(rows.len(), report.trials[0].traces[v].iterations_run);
    }
    assert_eq!(report.trials[0].alpha, vec![0.5, 0.5]);
}

#[test]
fn trial_results_do_not_depend_on_thread_count() {
    let mut one = small(7);
    one.threads = 1;
    let mut many = small(7);
    many.threads = 4;
    let a = run_experiment(&one).unwrap();
    let b = run_experiment(&many).unwrap();
    // Serialized form leaves out wall-clock timings.
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn sensitivity_panels_cover_their_grids() {
    let cfg = ExperimentConfig {
        missing_ratios: vec![0.2],
        trials: 1,
        max_iters: 5,
        ..small(8)
    };
    let mut cfg = cfg;
    cfg.lambda = aslsl::experiment::weight_grid();
    cfg.eta = aslsl::experiment::weight_grid();
    cfg.delta = aslsl::experiment::weight_grid();
    cfg.gamma = vec![2.0, 3.0];
    cfg.include_baseline = false;
    let panels: Vec<_> = default_panels().into_iter().filter(|p| p.name != "gamma").collect();
    let rows = sweep_sensitivity(&cfg, &panels).unwrap();
    assert_eq!(rows.len(), 3 * 49);
    for panel in &panels {
        let mine: Vec<_> = rows.iter().filter(|r| r.panel == panel.name).collect();
        assert_eq!(mine.len(), 49);
        for (param, value) in &panel.fixed {
            let got = |r: &aslsl::experiment::SensitivityRow| match param {
                Param::Lambda => r.lambda,
                Param::Eta => r.eta,
                Param::Delta => r.delta,
                Param::Gamma => r.gamma,
            };
            assert!(mine.iter().all(|r| got(r) == *value), "{} not fixed", param.name());
        }
        assert!(mine.iter().all(|r| (0.0..=1.0).contains(&r.ap_mean)));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sensitivity.csv");
    write_sensitivity_csv(&rows, &path).unwrap();
    assert_eq!(read_csv(&path).1.len(), rows.len());
}

#[test]
fn sweep_rejects_underspecified_panels() {
    let mut panels = default_panels();
    panels[1].fixed.clear();
    assert!(sweep_sensitivity(&small(1), &panels).is_err());
}
