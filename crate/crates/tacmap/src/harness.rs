//! End-to-end experiments: simulate touches along a path, fuse frames, filter,
//! and score the MAP estimate against ground truth at every step.

use tacmap_core::features::extract_triplet;
use tacmap_core::filter::{control_update, init_uniform, localization_error, map_estimate, measurement_update};
use tacmap_core::imaging::{average_frames, preprocess_tactile};
use tacmap_core::measurement::{MeasurementConfig, MeasurementKind};
use tacmap_core::simulator::{
    derive_seed, generate_path, make_shape_map, permute_locations, simulate_odometry, simulate_touch,
};
use tacmap_core::{
    Belief, Control, FeatureConfig, GrayImage, LikelihoodGrid, MotionConfig, OdometryModel, Path, PreprocessConfig,
    Scene, SensorModel, State, StateSpace, WindowField,
};

use crate::config::{ExperimentConfig, Fusion};
use crate::error::{Error, Result};
use crate::formats::import_scene;
use crate::parallel;

/// Diagnostic recorded when no frame of the whole run passed preprocessing.
pub const NO_INFORMATIVE_MEASUREMENTS: &str = "no informative measurements";

const TAG_FRAME: u64 = 0xf4a3e;
const TAG_ODOMETRY: u64 = 0x0d0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub control: Control,
    pub truth: State,
    pub estimate: State,
    pub error_px: f64,
    pub error_mm: f64,
    /// Posterior entropy in nats.
    pub entropy: f64,
    /// Frames that passed preprocessing at this location.
    pub frames_accepted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub path: Vec<State>,
    /// One record per location, starting with the initial touch.
    pub records: Vec<StepRecord>,
    pub success: bool,
    /// First step whose error is below the success threshold.
    pub steps_to_success: Option<usize>,
    pub diagnostics: Vec<String>,
}

impl RunReport {
    pub fn final_error_mm(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.error_mm)
    }
}

/// Everything a run needs that does not depend on the run seed.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub cfg: ExperimentConfig,
    pub scene: Scene,
    pub space: StateSpace,
    /// Absent for the cross-correlation measurement model.
    pub field: Option<WindowField>,
    features: FeatureConfig,
    preprocess: PreprocessConfig,
    measurement: MeasurementConfig,
    motion: MotionConfig,
    sensor: SensorModel,
    odometry: OdometryModel,
}

impl PreparedExperiment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let scene = if cfg.scene.map.is_empty() {
            let mut scene = make_shape_map(cfg.shape()?, cfg.scene.rows, cfg.scene.cols, cfg.scene.seed)?;
            scene.mm_per_pixel = cfg.scene.mm_per_pixel;
            scene
        } else {
            import_scene(std::path::Path::new(&cfg.scene.map))?
        };
        Self::with_scene(cfg, scene)
    }

    pub fn with_scene(cfg: &ExperimentConfig, scene: Scene) -> Result<Self> {
        cfg.validate()?;
        let (wr, wc) = cfg.window_dims();
        let space = StateSpace::new(scene.map.rows(), scene.map.cols(), wr, wc)?;
        let features = cfg.feature_config();
        let measurement = cfg.measurement_config();
        let field = match measurement.kind {
            MeasurementKind::Descriptor => {
                Some(parallel::window_field(&scene.map, &space, &features, measurement.window, cfg.run.workers)?)
            }
            MeasurementKind::CrossCorrelation => None,
        };
        Ok(Self {
            cfg: cfg.clone(),
            scene,
            space,
            field,
            features,
            preprocess: cfg.preprocess_config(),
            measurement,
            motion: cfg.motion_config()?,
            sensor: cfg.sensor_model(),
            odometry: cfg.odometry_model(),
        })
    }

    /// The touch path for `run_seed`. A scene without enough on-shape windows
    /// falls back to unconstrained locations so the run still executes (and
    /// reports its measurements as uninformative).
    pub fn path_for(&self, run_seed: u64, diagnostics: &mut Vec<String>) -> Result<Path> {
        match generate_path(&self.scene, &self.space, &self.cfg.path_config(), run_seed) {
            Err(tacmap_core::Error::InsufficientPositions { required, available }) => {
                diagnostics.push(format!(
                    "only {available} of {required} required on-shape windows; locations drawn without the shape constraint"
                ));
                let n = self.cfg.path.n_locations;
                let all: Vec<State> = self.space.states().collect();
                let shuffled = permute_locations(&all, derive_seed(run_seed, &[0xbde7_u64]))?;
                Ok(Path::new(shuffled.poses().iter().copied().take(n).collect())?)
            }
            other => Ok(other?),
        }
    }

    pub fn run(&self, run_seed: u64) -> Result<RunReport> {
        let mut diagnostics = Vec::new();
        let path = self.path_for(run_seed, &mut diagnostics)?;
        self.run_path(&path, run_seed, diagnostics, None)
    }

    /// Runs along a given path; when `beliefs` is provided it receives the posterior of every step.
    pub fn run_path(
        &self,
        path: &Path,
        run_seed: u64,
        mut diagnostics: Vec<String>,
        mut beliefs: Option<&mut Vec<Belief>>,
    ) -> Result<RunReport> {
        for &p in path.poses() {
            self.space.check(p)?;
        }
        let poses = path.poses();
        let steps = self.cfg.run.max_steps.min(poses.len() - 1);
        let threshold = self.cfg.run.success_threshold_mm;
        let mut bel = init_uniform(&self.space);
        let mut records = Vec::with_capacity(steps + 1);
        let mut informative = 0;
        let mut degenerate = false;

        for (k, &truth) in poses.iter().enumerate().take(steps + 1) {
            let control = if k == 0 {
                Control::ZERO
            } else {
                simulate_odometry(poses[k - 1], truth, &self.odometry, derive_seed(run_seed, &[TAG_ODOMETRY, k as u64]))
            };
            if k > 0 {
                match control_update(&bel, control, &self.motion) {
                    Ok(next) => bel = next,
                    Err(tacmap_core::Error::DegenerateUpdate) => {
                        degenerate = true;
                        diagnostics.push(format!("step {k}: all mass left the map; prediction skipped"));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let accepted = self.touch(truth, run_seed, k)?;
            if !accepted.is_empty() {
                informative += 1;
            }
            let fused = match self.cfg.run.fusion {
                Fusion::Average if accepted.is_empty() => Vec::new(),
                Fusion::Average => vec![average_frames(&accepted)?],
                Fusion::Sequential => accepted.clone(),
            };
            for img in &fused {
                let like = self.likelihood(img)?;
                match measurement_update(&bel, &like) {
                    Ok(next) => bel = next,
                    Err(tacmap_core::Error::DegenerateUpdate) => {
                        degenerate = true;
                        diagnostics.push(format!("step {k}: degenerate measurement update skipped"));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let (estimate, _) = map_estimate(&bel);
            let err = localization_error(&self.space, estimate, truth, self.scene.mm_per_pixel);
            records.push(StepRecord {
                step: k,
                control,
                truth,
                estimate,
                error_px: err.pixels,
                error_mm: err.mm,
                entropy: bel.entropy(),
                frames_accepted: accepted.len(),
            });
            if let Some(out) = beliefs.as_deref_mut() {
                out.push(bel.clone());
            }
        }

        if informative == 0 {
            diagnostics.push(NO_INFORMATIVE_MEASUREMENTS.to_string());
        }
        let steps_to_success = records.iter().find(|r| r.error_mm < threshold).map(|r| r.step);
        let success = steps_to_success.is_some() && informative > 0 && !degenerate;
        Ok(RunReport { seed: run_seed, path: poses.to_vec(), records, success, steps_to_success, diagnostics })
    }

    /// MAP estimate after fusing the touch at `pose` into the uniform prior;
    /// `None` when no frame passed preprocessing.
    pub fn initial_estimate(&self, pose: State, run_seed: u64) -> Result<Option<State>> {
        self.space.check(pose)?;
        let accepted = self.touch(pose, run_seed, 0)?;
        if accepted.is_empty() {
            return Ok(None);
        }
        let fused = match self.cfg.run.fusion {
            Fusion::Average => vec![average_frames(&accepted)?],
            Fusion::Sequential => accepted,
        };
        let mut bel = init_uniform(&self.space);
        for img in &fused {
            bel = measurement_update(&bel, &self.likelihood(img)?)?;
        }
        Ok(Some(map_estimate(&bel).0))
    }

    /// Simulated frames at `pose` that pass preprocessing.
    fn touch(&self, pose: State, run_seed: u64, step: usize) -> Result<Vec<GrayImage>> {
        let mut accepted = Vec::new();
        for f in 0..self.cfg.run.frames_per_touch {
            let seed = derive_seed(run_seed, &[TAG_FRAME, step as u64, f as u64]);
            let frame = simulate_touch(&self.scene, &self.space, pose, &self.sensor, seed)?;
            accepted.extend(preprocess_tactile(&frame, &self.preprocess));
        }
        Ok(accepted)
    }

    fn likelihood(&self, img: &GrayImage) -> Result<LikelihoodGrid> {
        let eps = self.measurement.epsilon;
        // runs are parallelized at the bench level, so each run evaluates serially
        match &self.field {
            Some(field) => {
                let z = extract_triplet(img, &self.features)?;
                parallel::likelihood(&z, field, self.measurement.metric, eps, 1)
            }
            None => parallel::ncc_likelihood(img, &self.scene.map, &self.space, eps, 1),
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, run_seed: u64) -> Result<RunReport> {
    PreparedExperiment::new(cfg)?.run(run_seed)
}

/// Seeds `base_seed .. base_seed + run_count`, run concurrently, reported in seed order.
pub fn run_bench(prepared: &PreparedExperiment) -> Result<Vec<RunReport>> {
    let run = &prepared.cfg.run;
    let base = run.base_seed;
    parallel::partitioned(run.run_count, run.workers, |r| r.map(|k| prepared.run(base + k as u64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub runs: usize,
    pub mean_px: f64,
    pub median_px: f64,
    pub mean_mm: f64,
    pub median_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub runs: usize,
    pub successes: usize,
    pub success_fraction: f64,
    /// Final-step errors in mm.
    pub error_histogram: Vec<HistogramBin>,
    /// `steps_histogram[k]` counts successful runs with `steps_to_success == k`.
    pub steps_histogram: Vec<usize>,
    pub per_step: Vec<StepStats>,
}

/// Edges (mm) of the final-error histogram; the last bin is open-ended.
pub const ERROR_BIN_EDGES_MM: [f64; 7] = [0.0, 2.5, 5.0, 10.0, 20.0, 40.0, f64::INFINITY];

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SummaryStats {
    pub fn mean_error_px(&self, step: usize) -> Option<f64> {
        self.per_step.iter().find(|s| s.step == step).map(|s| s.mean_px)
    }

    /// Median `steps_to_success` among successful runs.
    pub fn median_steps_to_success(&self) -> Option<f64> {
        let mut v: Vec<f64> =
            self.steps_histogram.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k as f64, n)).collect();
        (!v.is_empty()).then(|| median(&mut v))
    }
}

pub fn aggregate(reports: &[RunReport]) -> Result<SummaryStats> {
    if reports.is_empty() {
        return Err(Error::Config("aggregate needs at least one report".into()));
    }
    let runs = reports.len();
    let successes = reports.iter().filter(|r| r.success).count();
    let mut error_histogram: Vec<HistogramBin> =
        ERROR_BIN_EDGES_MM.windows(2).map(|w| HistogramBin { lo: w[0], hi: w[1], count: 0 }).collect();
    for r in reports {
        let e = r.final_error_mm();
        if let Some(bin) = error_histogram.iter_mut().find(|b| e >= b.lo && e < b.hi) {
            bin.count += 1;
        } else {
            error_histogram.last_mut().expect("bins").count += 1;
        }
    }
    let longest = reports.iter().map(|r| r.records.len()).max().unwrap_or(0);
    let mut steps_histogram = vec![0; longest.max(1)];
    for k in reports.iter().filter(|r| r.success).filter_map(|r| r.steps_to_success) {
        steps_histogram[k] += 1;
    }
    let per_step = (0..longest)
        .map(|k| {
            let mut px: Vec<f64> = reports.iter().filter_map(|r| r.records.get(k)).map(|s| s.error_px).collect();
            let mut mm: Vec<f64> = reports.iter().filter_map(|r| r.records.get(k)).map(|s| s.error_mm).collect();
            let n = px.len();
            StepStats {
                step: k,
                runs: n,
                mean_px: px.iter().sum::<f64>() / n as f64,
                median_px: median(&mut px),
                mean_mm: mm.iter().sum::<f64>() / n as f64,
                median_mm: median(&mut mm),
            }
        })
        .collect();
    Ok(SummaryStats {
        runs,
        successes,
        success_fraction: successes as f64 / runs as f64,
        error_histogram,
        steps_histogram,
        per_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, error_mm: f64) -> StepRecord {
        StepRecord {
            step,
            control: Control::ZERO,
            truth: State::new(0, 0),
            estimate: State::new(0, 0),
            error_px: error_mm,
            error_mm,
            entropy: 0.0,
            frames_accepted: 1,
        }
    }

    fn report(errors: &[f64], threshold: f64) -> RunReport {
        let records: Vec<StepRecord> = errors.iter().enumerate().map(|(k, &e)| record(k, e)).collect();
        let steps_to_success = records.iter().find(|r| r.error_mm < threshold).map(|r| r.step);
        RunReport { seed: 0, path: vec![], records, success: steps_to_success.is_some(), steps_to_success, diagnostics: vec![] }
    }

    #[test]
    fn aggregate_twenty_of_twenty_two() {
        let mut reports: Vec<RunReport> = (0..20).map(|k| report(&[30.0, 10.0, 1.0 + k as f64 * 0.1], 5.0)).collect();
        reports.push(report(&[30.0, 25.0, 22.0], 5.0));
        reports.push(report(&[30.0, 60.0, 45.0], 5.0));
        let s = aggregate(&reports).unwrap();
        assert_eq!((s.runs, s.successes), (22, 20));
        assert_eq!(s.success_fraction, 20.0 / 22.0);
        assert_eq!(s.error_histogram.iter().map(|b| b.count).sum::<usize>(), 22);
        assert_eq!(s.steps_histogram.iter().sum::<usize>(), 20);
        assert_eq!(s.steps_histogram[2], 20);
        assert_eq!(s.median_steps_to_success(), Some(2.0));
        assert_eq!(s.per_step[0].mean_mm, 30.0);
    }

    #[test]
    fn aggregate_single_and_empty() {
        let s = aggregate(&[report(&[8.0, 4.0, 6.0], 5.0)]).unwrap();
        assert_eq!(s.per_step.iter().map(|p| p.median_mm).collect::<Vec<_>>(), vec![8.0, 4.0, 6.0]);
        assert_eq!(s.steps_histogram, vec![0, 1, 0]);
        assert_eq!(s.error_histogram[2].count, 1);
        assert_eq!(s.success_fraction, 1.0);
        assert!(aggregate(&[]).is_err());
    }
}
