//! `tacmap` command line.
//!
//! Every config key is also a flag: `tacmap bench --sensor.noise_sigma 0.1 --run.run_count 50`.
//! Exit status is 0 on success, 1 when `bench` falls below `run.success_floor`
//! or an oracle check fails, and 2 on errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

use crate::artifacts::{emit_artifacts, summary_text, RunArtifacts};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::formats::{read_belief_csv, read_path_csv};
use crate::harness::{aggregate, PreparedExperiment, SummaryStats};
use crate::oracle::{scripted_forward_check, sift_check};
use crate::parallel;
use crate::pgm::write_heatmap;

/// Config file plus one `--section.key VALUE` flag per config key.
#[derive(Debug, Clone, Default)]
pub struct ConfigArgs {
    pub config: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let cfg = base.with_overrides(self.overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let overrides = ExperimentConfig::keys()
            .into_iter()
            .filter_map(|k| m.get_one::<String>(&k).map(|v| (k.clone(), v.clone())))
            .collect();
        Ok(Self { config: m.get_one::<PathBuf>("config").cloned(), overrides })
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> std::result::Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for ConfigArgs {
    fn augment_args(cmd: Command) -> Command {
        let mut cmd = cmd.arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("TOML experiment config; missing keys take defaults"),
        );
        for key in ExperimentConfig::keys() {
            cmd = cmd.arg(Arg::new(key.clone()).long(key).value_name("VALUE").help_heading("Config overrides"));
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

#[derive(Debug, Parser)]
#[command(name = "tacmap", version, about = "Localize tactile array touches in a visual object map")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Run one exploration and write its step records and beliefs.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run seed (defaults to run.base_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Touch path CSV (index,row,col) instead of a generated path.
        #[arg(long, value_name = "FILE")]
        touch_path: Option<PathBuf>,
    },
    /// Run run.run_count explorations and aggregate them.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-render belief heatmaps from a beliefs.csv.
    Heatmap {
        /// beliefs.csv written by `run` or `bench`.
        beliefs: PathBuf,
        /// Output directory for belief_<step>.pgm files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the brute-force reference checks.
    Oracle {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the effective config as TOML.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Runs a subcommand; `Ok(false)` means it completed but its check failed.
pub fn execute(command: Commands) -> Result<bool> {
    match command {
        Commands::Run { config, seed, touch_path } => {
            let cfg = config.resolve()?;
            let prepared = PreparedExperiment::new(&cfg)?;
            let seed = seed.unwrap_or(cfg.run.base_seed);
            let mut diagnostics = Vec::new();
            let path = match touch_path {
                Some(p) => read_path_csv(&p)?,
                None => prepared.path_for(seed, &mut diagnostics)?,
            };
            let mut beliefs = Vec::new();
            let report = prepared.run_path(&path, seed, diagnostics, Some(&mut beliefs))?;
            let summary = aggregate(std::slice::from_ref(&report))?;
            for r in &report.records {
                println!(
                    "step {} truth ({},{}) map ({},{}) error {:.2} mm entropy {:.3}",
                    r.step, r.truth.row, r.truth.col, r.estimate.row, r.estimate.col, r.error_mm, r.entropy
                );
            }
            for d in &report.diagnostics {
                println!("note: {d}");
            }
            println!("success: {} steps_to_success: {:?}", report.success, report.steps_to_success);
            let written = emit_artifacts(&cfg.output.dir, &[RunArtifacts { report, beliefs }], &summary, cfg.output.heatmaps)?;
            println!("wrote {} files under {}", written.len(), cfg.output.dir.display());
            Ok(true)
        }
        Commands::Bench { config } => {
            let cfg = config.resolve()?;
            let prepared = PreparedExperiment::new(&cfg)?;
            let runs = bench_artifacts(&prepared, cfg.output.heatmaps)?;
            let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
            let summary = aggregate(&reports)?;
            emit_artifacts(&cfg.output.dir, &runs, &summary, cfg.output.heatmaps)?;
            print!("{}", summary_text(&summary));
            Ok(meets_floor(&summary, cfg.run.success_floor))
        }
        Commands::Heatmap { beliefs, out } => {
            let written = rerender_heatmaps(&beliefs, &out)?;
            println!("wrote {written} heatmaps to {}", out.display());
            Ok(true)
        }
        Commands::Oracle { seed } => {
            let fwd = scripted_forward_check(seed)?;
            let sift = sift_check(16, 18, &Default::default(), seed)?;
            let fwd_ok = fwd.worst() < 1e-9;
            let sift_ok = sift.max_reference_diff < 1e-9 && sift.max_rotation_diff < 1e-3;
            println!("forward recursion over {} states: max |diff| {:.3e} ({})", fwd.states, fwd.worst(), verdict(fwd_ok));
            println!(
                "descriptor on {} patches: reference {:.3e}, quarter turn {:.3e} ({})",
                sift.patches,
                sift.max_reference_diff,
                sift.max_rotation_diff,
                verdict(sift_ok)
            );
            Ok(fwd_ok && sift_ok)
        }
        Commands::Config { config } => {
            print!("{}", config.resolve()?.to_toml_string());
            Ok(true)
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn meets_floor(summary: &SummaryStats, floor: f64) -> bool {
    summary.success_fraction >= floor
}

/// Bench runs in seed order, keeping per-step beliefs when requested.
pub fn bench_artifacts(prepared: &PreparedExperiment, keep_beliefs: bool) -> Result<Vec<RunArtifacts>> {
    let run = &prepared.cfg.run;
    parallel::partitioned(run.run_count, run.workers, |range| {
        range
            .map(|k| {
                let seed = run.base_seed + k as u64;
                let mut diagnostics = Vec::new();
                let path = prepared.path_for(seed, &mut diagnostics)?;
                let mut beliefs = Vec::new();
                let report = prepared.run_path(&path, seed, diagnostics, keep_beliefs.then_some(&mut beliefs))?;
                Ok(RunArtifacts { report, beliefs })
            })
            .collect()
    })
}

/// Writes `belief_<step>.pgm` for every step in a beliefs CSV; returns the count.
pub fn rerender_heatmaps(beliefs: &Path, out: &Path) -> Result<usize> {
    std::fs::create_dir_all(out).map_err(|e| crate::Error::Io { path: out.to_path_buf(), source: e })?;
    let steps = read_belief_csv(beliefs)?;
    for (step, rows, cols, mass) in &steps {
        write_heatmap(&out.join(format!("belief_{step}.pgm")), mass, *rows, *cols, 65535)?;
    }
    Ok(steps.len())
}

