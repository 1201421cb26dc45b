//! Host-side companion to [`tacmap_core`]: file formats, worker-count-independent
//! parallel evaluation, the experiment harness, reference oracles, and the
//! `tacmap` command line.
//!
//! ```no_run
//! use tacmap::config::ExperimentConfig;
//! use tacmap::harness::{aggregate, run_bench, PreparedExperiment};
//!
//! let prepared = PreparedExperiment::new(&ExperimentConfig::default())?;
//! let summary = aggregate(&run_bench(&prepared)?)?;
//! println!("success fraction {:.2}", summary.success_fraction);
//! # Ok::<(), tacmap::Error>(())
//! ```

#![forbid(unsafe_code)]

pub mod artifacts;
pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod harness;
pub mod oracle;
pub mod parallel;
pub mod pgm;

pub use error::{Error, Result};
pub use tacmap_core as core;
