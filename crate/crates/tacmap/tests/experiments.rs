use tacmap::config::{ExperimentConfig, Fusion};
use tacmap::formats::{read_path_csv, write_path_csv};
use tacmap::harness::{aggregate, run_bench, PreparedExperiment, NO_INFORMATIVE_MEASUREMENTS};
use tacmap_core::simulator::DEFAULT_MM_PER_PIXEL;
use tacmap_core::{GrayImage, Scene};

fn short(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.run.run_count = 4;
    cfg.run.frames_per_touch = 5;
    cfg
}

#[test]
fn repeated_runs_are_identical() {
    let prepared = PreparedExperiment::new(&short(ExperimentConfig::default())).unwrap();
    assert_eq!(prepared.run(11).unwrap(), prepared.run(11).unwrap());
    assert_ne!(prepared.run(11).unwrap().path, prepared.run(12).unwrap().path);
}

#[test]
fn bench_does_not_depend_on_worker_count() {
    let mut cfg = short(ExperimentConfig::default());
    cfg.run.workers = 1;
    let serial = run_bench(&PreparedExperiment::new(&cfg).unwrap()).unwrap();
    cfg.run.workers = 3;
    let threaded = run_bench(&PreparedExperiment::new(&cfg).unwrap()).unwrap();
    assert_eq!(serial, threaded);
    assert_eq!(serial.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
}

#[test]
fn noise_free_run_localizes_immediately() {
    let prepared = PreparedExperiment::new(&short(ExperimentConfig::noise_free())).unwrap();
    let report = prepared.run(3).unwrap();
    assert!(report.success, "{report:?}");
    assert!(report.steps_to_success.unwrap() <= 1);
    assert_eq!(report.records.len(), 7);
    assert_eq!(report.records[0].error_px, 0.0);
    assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
}

#[test]
fn sequential_fusion_also_localizes() {
    let mut cfg = short(ExperimentConfig::noise_free());
    cfg.run.fusion = Fusion::Sequential;
    let report = PreparedExperiment::new(&cfg).unwrap().run(5).unwrap();
    assert!(report.success);
    assert!(report.records.iter().all(|r| r.frames_accepted == 5));
}

#[test]
fn blank_scene_reports_uninformative_measurements() {
    let blank = || Scene::new(GrayImage::zeros(120, 120), DEFAULT_MM_PER_PIXEL).unwrap();
    let prepared = PreparedExperiment::with_scene(&short(ExperimentConfig::noise_free()), blank()).unwrap();
    let report = prepared.run(0).unwrap();
    assert!(!report.success);
    assert!(report.diagnostics.iter().any(|d| d == NO_INFORMATIVE_MEASUREMENTS), "{:?}", report.diagnostics);
    assert!(report.records.iter().all(|r| r.frames_accepted == 0));
    assert_eq!(report.records.len(), 7);

    // sensor noise alone clears the default contact thresholds
    let noisy = PreparedExperiment::with_scene(&short(ExperimentConfig::default()), blank()).unwrap();
    let report = noisy.run(0).unwrap();
    assert!(report.records.iter().all(|r| r.frames_accepted > 0));
    assert!(!report.diagnostics.iter().any(|d| d == NO_INFORMATIVE_MEASUREMENTS));
}

#[test]
fn reloaded_path_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let prepared = PreparedExperiment::new(&short(ExperimentConfig::default())).unwrap();
    let mut diagnostics = Vec::new();
    let path = prepared.path_for(9, &mut diagnostics).unwrap();
    let file = dir.path().join("path.csv");
    write_path_csv(&file, &path).unwrap();
    let reloaded = read_path_csv(&file).unwrap();
    assert_eq!(reloaded, path);
    let a = prepared.run_path(&path, 9, Vec::new(), None).unwrap();
    let b = prepared.run_path(&reloaded, 9, Vec::new(), None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, prepared.run(9).unwrap());
}

#[test]
fn discard_boundary_runs_cleanly() {
    let cfg = short(ExperimentConfig::default())
        .with_overrides([("motion.boundary", "discard")])
        .unwrap();
    let reports = run_bench(&PreparedExperiment::new(&cfg).unwrap()).unwrap();
    let summary = aggregate(&reports).unwrap();
    assert_eq!(summary.runs, 4);
    assert!(summary.success_fraction >= 0.75);
}

#[test]
fn cross_correlation_baseline_runs() {
    let cfg = short(ExperimentConfig::default()).with_overrides([("measurement.kind", "ncc")]).unwrap();
    let prepared = PreparedExperiment::new(&cfg).unwrap();
    assert!(prepared.field.is_none());
    let report = prepared.run(1).unwrap();
    assert_eq!(report.records.len(), 7);
    assert!(report.records.iter().all(|r| r.error_px.is_finite()));
}
