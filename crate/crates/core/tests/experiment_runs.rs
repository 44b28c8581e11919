use std::collections::BTreeMap;

use zoirl_core::experiment::config::{SyntheticSource, TraceSource};
use zoirl_core::experiment::outputs::{CURVE_HEADER, DISTRICT};
use zoirl_core::experiment::{load_traces, run_district, run_experiment, run_sweep, ExperimentConfig, Mode};
use zoirl_core::sim::write_traces_csv;
use zoirl_core::Error;

fn small(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        traces: TraceSource::Synthetic(SyntheticSource {
            n_buildings: 3,
            n_weeks: 3,
            ..SyntheticSource::default()
        }),
        ..ExperimentConfig::default()
    }
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let cfg = small(Mode::Zoirl);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.render().unwrap(), b.render().unwrap());

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    a.write(da.path()).unwrap();
    b.write(db.path()).unwrap();
    for (name, _) in a.render().unwrap() {
        let x = std::fs::read(da.path().join(name)).unwrap();
        let y = std::fs::read(db.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn learning_curve_layout() {
    let out = run_district(&small(Mode::Zoirl)).unwrap();
    let csv = out.learning_curve_csv().unwrap();
    assert_eq!(csv.lines().next().unwrap(), CURVE_HEADER);
    assert!(out.learning_curve.iter().any(|r| r.building_id == DISTRICT));
    // Three buildings, three candidates per generation, one per day: 7 updates in 21 days.
    let updates = out.learning_curve.iter().filter(|r| r.building_id == DISTRICT).count();
    assert_eq!(updates, 7);
    assert_eq!(out.theta.len(), 3);
    assert!(out.theta.iter().all(|t| t.theta.len() == 24 && t.theta.iter().all(|v| (0.0..=5.0).contains(v))));
}

#[test]
fn baseline_against_itself_scores_one() {
    let out = run_district(&small(Mode::Rbc)).unwrap();
    let r = out.report.unwrap();
    assert!(r.ratios.iter().all(|x| (x - 1.0).abs() < 1e-12), "{:?}", r.ratios);
}

#[test]
fn every_mode_runs() {
    for mode in [Mode::Zero, Mode::EsUnguided] {
        let out = run_district(&small(mode)).unwrap();
        assert!(out.report.unwrap().total_score.is_finite());
    }
}

#[test]
fn csv_traces_reproduce_the_synthetic_run() {
    let cfg = small(Mode::Zoirl);
    let traces = load_traces(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.csv");
    write_traces_csv(&traces, std::fs::File::create(&path).unwrap()).unwrap();
    let from_csv = ExperimentConfig {
        traces: TraceSource::Csv(path),
        ..cfg.clone()
    };
    let a = run_district(&cfg).unwrap();
    let b = run_district(&from_csv).unwrap();
    assert_eq!(a.metrics_csv().unwrap(), b.metrics_csv().unwrap());
    assert_eq!(a.theta, b.theta);
}

#[test]
fn sweep_covers_every_cell_and_seed() {
    let mut cfg = small(Mode::Zoirl);
    cfg.traces = TraceSource::Synthetic(SyntheticSource {
        n_buildings: 2,
        n_weeks: 2,
        ..SyntheticSource::default()
    });
    cfg.sweep.grid = BTreeMap::from([("schedule.iota1".to_string(), vec![0.1.into(), 0.5.into()])]);
    cfg.sweep.seeds = 2;
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.cells.len(), 2);
    for c in &out.cells {
        assert_eq!(c.runs.len(), 2);
        assert!(c.failures.is_empty());
    }
    let dir = tempfile::tempdir().unwrap();
    out.write(dir.path(), &cfg).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("cells/cell_001.csv").exists());
}

#[test]
fn bad_sweep_cells_are_recorded_not_fatal() {
    let mut cfg = small(Mode::Zero);
    cfg.traces = TraceSource::Synthetic(SyntheticSource {
        n_buildings: 2,
        n_weeks: 1,
        ..SyntheticSource::default()
    });
    cfg.sweep.grid = BTreeMap::from([("schedule.iota1".to_string(), vec![0.2.into(), (-1.0).into()])]);
    cfg.sweep.seeds = 1;
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.cells[0].runs.len(), 1);
    assert_eq!(out.cells[1].failures.len(), 1);
}

#[test]
fn config_errors_list_every_problem() {
    let err = ExperimentConfig::from_json_str(
        r#"{"schedule": {"iota1": -1, "n_candidates": 0}, "theta": {"lo": 3, "hi": 1}}"#,
        &[],
    )
    .unwrap_err();
    match err {
        Error::Config(problems) => assert!(problems.len() >= 3, "{problems:?}"),
        other => panic!("expected a config error, got {other}"),
    }
    assert!(ExperimentConfig::from_json_str(r#"{"schedul": {}}"#, &[]).is_err());
}
