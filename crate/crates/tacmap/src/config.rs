//! Experiment configuration: a TOML file whose sections mirror [`ExperimentConfig`].
//!
//! Every key can be overridden as `--section.key value`; the value is parsed as
//! a TOML literal and falls back to a bare string, so `--scene.shape scissors`
//! and `--sensor.noise_sigma 0` both work.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tacmap_core::features::{FeatureConfig, SiftConfig, TripletConfig, TripletLayout};
use tacmap_core::filter::{BoundaryPolicy, MotionConfig, Neighborhood};
use tacmap_core::imaging::{PreprocessConfig, ResampleKernel};
use tacmap_core::measurement::{MeasurementConfig, MeasurementKind, DEFAULT_EPSILON};
use tacmap_core::simulator::{OdometryModel, PathConfig, SensorModel, ShapeSpec, DEFAULT_MM_PER_PIXEL};
use tacmap_core::{TripletMetric, WindowModel};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    /// `gecko`, `scissors`, `polygon-chain` or `blank`.
    pub shape: String,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Optional PGM file used instead of a generated shape.
    pub map: String,
    pub mm_per_pixel: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self { shape: "gecko".into(), seed: 1, rows: 120, cols: 120, map: String::new(), mm_per_pixel: DEFAULT_MM_PER_PIXEL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    pub n_locations: usize,
    pub min_shape_fraction: f64,
    /// Fixes the location set across runs; only the visiting order follows the run seed.
    pub location_seed: Option<u64>,
}

impl Default for PathSection {
    fn default() -> Self {
        let d = PathConfig::default();
        Self { n_locations: d.n_locations, min_shape_fraction: d.min_shape_fraction, location_seed: d.location_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub rows: usize,
    pub cols: usize,
    pub noise_sigma: f64,
    pub quantization_levels: u32,
    pub dropout_prob: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let d = SensorModel::default();
        Self {
            rows: d.rows,
            cols: d.cols,
            noise_sigma: d.noise_sigma,
            quantization_levels: d.quantization_levels,
            dropout_prob: d.dropout_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometrySection {
    pub trans_sigma: f64,
}

impl Default for OdometrySection {
    fn default() -> Self {
        Self { trans_sigma: OdometryModel::default().trans_sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub max_threshold: f64,
    pub sum_threshold: f64,
    pub scale_factor: usize,
    pub kernel: Kernel,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let d = PreprocessConfig::default();
        Self { max_threshold: d.max_threshold, sum_threshold: d.sum_threshold, scale_factor: d.scale_factor, kernel: Kernel::Nearest }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    Spaced,
    Covering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub align_orientation: bool,
    pub gaussian_window: bool,
    pub clip: f64,
    pub patch_size: usize,
    pub spacing: usize,
    pub layout: Layout,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let s = SiftConfig::default();
        let t = TripletConfig::default();
        Self {
            align_orientation: s.align_orientation,
            gaussian_window: s.gaussian_window,
            clip: s.clip,
            patch_size: t.patch_size,
            spacing: t.spacing,
            layout: Layout::Spaced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Descriptor,
    Ncc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Matched,
    PairwiseL2,
    PairwiseSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Windows seen at sensor-cell resolution (cell = `preprocess.scale_factor`).
    Sensor,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSection {
    pub kind: Kind,
    pub metric: Metric,
    pub window: Window,
    pub epsilon: f64,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self { kind: Kind::Descriptor, metric: Metric::Matched, window: Window::Sensor, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub sigma_row: f64,
    pub sigma_col: f64,
    /// 4, 8 or 24 neighbours around the nearest predicted state.
    pub neighborhood: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Off-map predictions pile onto the nearest edge state; no mass is lost.
    Clamp,
    /// Mass predicted off the map is dropped.
    Discard,
}

impl Default for MotionSection {
    fn default() -> Self {
        let d = MotionConfig::default();
        Self { sigma_row: d.sigma_row, sigma_col: d.sigma_col, neighborhood: d.neighborhood.count(), boundary: Boundary::Clamp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fusion {
    /// Average the accepted frames, then one measurement update.
    Average,
    /// One measurement update per accepted frame.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub frames_per_touch: usize,
    pub fusion: Fusion,
    pub success_threshold_mm: f64,
    pub max_steps: usize,
    pub run_count: usize,
    /// Run `k` of a bench uses seed `base_seed + k`.
    pub base_seed: u64,
    /// Worker threads; 0 = one per core.
    pub workers: usize,
    /// `bench` exits nonzero when the success fraction falls below this.
    pub success_floor: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            frames_per_touch: 20,
            fusion: Fusion::Average,
            success_threshold_mm: 5.0,
            max_steps: 6,
            run_count: 20,
            base_seed: 0,
            workers: 0,
            success_floor: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write one belief PGM per step.
    pub heatmaps: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("tacmap-out"), heatmaps: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSection,
    pub path: PathSection,
    pub sensor: SensorSection,
    pub odometry: OdometrySection,
    pub preprocess: PreprocessSection,
    pub features: FeaturesSection,
    pub measurement: MeasurementSection,
    pub motion: MotionSection,
    pub run: RunSection,
    pub output: OutputSection,
}

/// Keys that are absent from a serialized default config.
const OPTIONAL_KEYS: &[&str] = &["path.location_seed"];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Every overridable `section.key`, in file order.
    pub fn keys() -> Vec<String> {
        let table = toml::Table::try_from(Self::default()).expect("config serializes");
        let mut keys = Vec::new();
        for (section, value) in &table {
            if let Some(t) = value.as_table() {
                keys.extend(t.keys().map(|k| format!("{section}.{k}")));
            }
        }
        for k in OPTIONAL_KEYS {
            if !keys.iter().any(|x| x == k) {
                keys.push((*k).to_string());
            }
        }
        keys
    }

    /// Applies `(section.key, raw value)` overrides and re-validates the schema.
    pub fn with_overrides<'a>(&self, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            let (section, field) = key.split_once('.').ok_or_else(|| Error::Config(format!("override {key:?} is not section.key")))?;
            let value = parse_literal(raw);
            table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{section} is not a section")))?
                .insert(field.to_string(), value);
        }
        table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn shape(&self) -> Result<ShapeSpec> {
        self.scene.shape.parse().map_err(|_| Error::Config(format!("unknown scene.shape {:?}", self.scene.shape)))
    }

    pub fn sensor_model(&self) -> SensorModel {
        let s = &self.sensor;
        SensorModel {
            rows: s.rows,
            cols: s.cols,
            noise_sigma: s.noise_sigma,
            quantization_levels: s.quantization_levels,
            dropout_prob: s.dropout_prob,
        }
    }

    pub fn odometry_model(&self) -> OdometryModel {
        OdometryModel { trans_sigma: self.odometry.trans_sigma }
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        let p = &self.preprocess;
        PreprocessConfig {
            max_threshold: p.max_threshold,
            sum_threshold: p.sum_threshold,
            scale_factor: p.scale_factor,
            kernel: match p.kernel {
                Kernel::Nearest => ResampleKernel::Nearest,
                Kernel::Bilinear => ResampleKernel::Bilinear,
            },
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        let f = &self.features;
        FeatureConfig {
            triplet: TripletConfig {
                patch_size: f.patch_size,
                spacing: f.spacing,
                layout: match f.layout {
                    Layout::Spaced => TripletLayout::Spaced,
                    Layout::Covering => TripletLayout::Covering,
                },
            },
            sift: SiftConfig { align_orientation: f.align_orientation, gaussian_window: f.gaussian_window, clip: f.clip },
        }
    }

    pub fn measurement_config(&self) -> MeasurementConfig {
        let m = &self.measurement;
        MeasurementConfig {
            kind: match m.kind {
                Kind::Descriptor => MeasurementKind::Descriptor,
                Kind::Ncc => MeasurementKind::CrossCorrelation,
            },
            metric: match m.metric {
                Metric::Matched => TripletMetric::Matched,
                Metric::PairwiseL2 => TripletMetric::PairwiseL2,
                Metric::PairwiseSquared => TripletMetric::PairwiseSquared,
            },
            window: match m.window {
                Window::Sensor => WindowModel::SensorCells(self.preprocess.scale_factor),
                Window::Raw => WindowModel::Raw,
            },
            epsilon: m.epsilon,
        }
    }

    pub fn motion_config(&self) -> Result<MotionConfig> {
        Ok(MotionConfig {
            sigma_row: self.motion.sigma_row,
            sigma_col: self.motion.sigma_col,
            neighborhood: Neighborhood::from_count(self.motion.neighborhood)?,
            boundary: match self.motion.boundary {
                Boundary::Clamp => BoundaryPolicy::Clamp,
                Boundary::Discard => BoundaryPolicy::Discard,
            },
        })
    }

    pub fn path_config(&self) -> PathConfig {
        PathConfig {
            n_locations: self.path.n_locations,
            min_shape_fraction: self.path.min_shape_fraction,
            location_seed: self.path.location_seed,
        }
    }

    /// Tactile image size after upsampling, which is also the window size.
    pub fn window_dims(&self) -> (usize, usize) {
        (self.sensor.rows * self.preprocess.scale_factor, self.sensor.cols * self.preprocess.scale_factor)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.shape()?;
        self.sensor_model().validate()?;
        self.preprocess_config().validate()?;
        self.motion_config()?.validate()?;
        if self.run.run_count == 0 {
            return bad("run.run_count must be >= 1");
        }
        if self.run.frames_per_touch == 0 {
            return bad("run.frames_per_touch must be >= 1");
        }
        if self.path.n_locations == 0 {
            return bad("path.n_locations must be >= 1");
        }
        if !(self.run.success_threshold_mm > 0.0) {
            return bad("run.success_threshold_mm must be > 0");
        }
        if !(self.scene.mm_per_pixel > 0.0 && self.scene.mm_per_pixel.is_finite()) {
            return bad("scene.mm_per_pixel must be > 0");
        }
        if !(self.odometry.trans_sigma >= 0.0 && self.odometry.trans_sigma.is_finite()) {
            return bad("odometry.trans_sigma must be >= 0");
        }
        if !(self.measurement.epsilon > 0.0 && self.measurement.epsilon.is_finite()) {
            return bad("measurement.epsilon must be > 0");
        }
        if !(0.0..=1.0).contains(&self.path.min_shape_fraction) {
            return bad("path.min_shape_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.run.success_floor) {
            return bad("run.success_floor must lie in [0, 1]");
        }
        let (wr, wc) = self.window_dims();
        if wr > self.scene.rows || wc > self.scene.cols {
            return bad("window larger than the map");
        }
        self.feature_config().triplet.offsets(wr, wc)?;
        Ok(())
    }

    /// The default config with every noise source switched off.
    pub fn noise_free() -> Self {
        let mut cfg = Self::default();
        cfg.sensor.noise_sigma = 0.0;
        cfg.sensor.quantization_levels = 0;
        cfg.sensor.dropout_prob = 0.0;
        cfg.odometry.trans_sigma = 0.0;
        cfg
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
