//! Localizes a planar tactile array inside a grayscale visual map of an object.
//!
//! Tactile readings and visual-map windows are described with the same compact
//! 32-element SIFT-style descriptor. A histogram (grid) Bayes filter over every
//! sliding-window start position combines an inverse-distance measurement model
//! with a locally weighted Gaussian motion model driven by odometry.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel evaluation and
//! the experiment harness live in the `tacmap` crate.
//!
//! - [`imaging`]: image and tactile-frame containers, resampling, preprocessing
//! - [`features`]: gradient fields, the 32-element descriptor, triplet extraction
//! - [`measurement`]: state space, window descriptor field, likelihood grids
//! - [`filter`]: belief, control and measurement updates, MAP estimate
//! - [`simulator`]: synthetic shape maps, tactile presses, odometry, paths
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod features;
pub mod filter;
pub mod imaging;
pub mod measurement;
pub mod simulator;

pub use crate::error::{Error, Result};
pub use crate::features::{Descriptor32, FeatureConfig, GradientField, SiftConfig, Triplet, TripletConfig, TripletLayout};
pub use crate::filter::{Belief, BoundaryPolicy, Control, LocalizationError, MotionConfig, Neighborhood};
pub use crate::imaging::{GrayImage, PreprocessConfig, ResampleKernel, TactileFrame};
pub use crate::measurement::{LikelihoodGrid, MeasurementConfig, State, StateSpace, TripletMetric, WindowField, WindowModel};
pub use crate::simulator::{OdometryModel, Path, Scene, SensorModel, ShapeSpec};
