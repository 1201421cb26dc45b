//! Output files of `run` and `bench`.
//!
//! ```text
//! <dir>/summary.csv              aggregate statistics (see below)
//! <dir>/summary.txt              the same, for humans
//! <dir>/run_<seed>/steps.csv     step,control_dx,control_dy,truth_row,truth_col,map_row,map_col,error_px,error_mm,entropy,frames_accepted
//! <dir>/run_<seed>/path.csv      index,row,col
//! <dir>/run_<seed>/beliefs.csv   step,row,col,mass            (when beliefs were captured)
//! <dir>/run_<seed>/belief_<k>.pgm                             (when heatmaps are enabled)
//! ```
//!
//! `summary.csv` has a variable number of fields per line. The first field names
//! the record: `runs,<runs>,<successes>,<success_fraction>`,
//! `error_bin,<lo_mm>,<hi_mm>,<count>`, `steps_bin,<steps>,<count>`,
//! `step,<step>,<runs>,<mean_px>,<median_px>,<mean_mm>,<median_mm>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tacmap_core::{Belief, Path as TouchPath};

use crate::error::{Error, Result};
use crate::formats::{write_belief_csv, write_grid_heatmap, write_path_csv};
use crate::harness::{HistogramBin, RunReport, StepStats, SummaryStats};

/// One run's report plus the per-step posteriors, if they were kept.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub beliefs: Vec<Belief>,
}

#[derive(Serialize)]
struct StepRow {
    step: usize,
    control_dx: f64,
    control_dy: f64,
    truth_row: usize,
    truth_col: usize,
    map_row: usize,
    map_col: usize,
    error_px: f64,
    error_mm: f64,
    entropy: f64,
    frames_accepted: usize,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn run_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("run_{seed:04}"))
}

pub fn write_steps_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in &report.records {
        w.serialize(StepRow {
            step: r.step,
            control_dx: r.control.dx,
            control_dy: r.control.dy,
            truth_row: r.truth.row,
            truth_col: r.truth.col,
            map_row: r.estimate.row,
            map_col: r.estimate.col,
            error_px: r.error_px,
            error_mm: r.error_mm,
            entropy: r.entropy,
            frames_accepted: r.frames_accepted,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the per-run files of every run; returns the paths written.
pub fn emit_runs(dir: &Path, runs: &[RunArtifacts], heatmaps: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for run in runs {
        let rd = run_dir(dir, run.report.seed);
        ensure_dir(&rd)?;
        let steps = rd.join("steps.csv");
        write_steps_csv(&steps, &run.report)?;
        written.push(steps);
        if let Ok(path) = TouchPath::new(run.report.path.clone()) {
            let p = rd.join("path.csv");
            write_path_csv(&p, &path)?;
            written.push(p);
        }
        if !run.beliefs.is_empty() {
            let p = rd.join("beliefs.csv");
            write_belief_csv(&p, &run.beliefs)?;
            written.push(p);
            if heatmaps {
                for (k, b) in run.beliefs.iter().enumerate() {
                    let p = rd.join(format!("belief_{k}.pgm"));
                    write_grid_heatmap(&p, b.space(), b.mass())?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}

/// Per-run files, `summary.csv` and `summary.txt`.
pub fn emit_artifacts(dir: &Path, runs: &[RunArtifacts], summary: &SummaryStats, heatmaps: bool) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = emit_runs(dir, runs, heatmaps)?;
    let csv_path = dir.join("summary.csv");
    fs::write(&csv_path, summary_csv(summary)).map_err(|e| Error::io(&csv_path, e))?;
    let txt_path = dir.join("summary.txt");
    fs::write(&txt_path, summary_text(summary)).map_err(|e| Error::io(&txt_path, e))?;
    written.push(csv_path);
    written.push(txt_path);
    Ok(written)
}

pub fn summary_csv(s: &SummaryStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "runs,{},{},{}", s.runs, s.successes, s.success_fraction);
    for b in &s.error_histogram {
        let _ = writeln!(out, "error_bin,{},{},{}", b.lo, b.hi, b.count);
    }
    for (k, n) in s.steps_histogram.iter().enumerate() {
        let _ = writeln!(out, "steps_bin,{k},{n}");
    }
    for p in &s.per_step {
        let _ = writeln!(out, "step,{},{},{},{},{},{}", p.step, p.runs, p.mean_px, p.median_px, p.mean_mm, p.median_mm);
    }
    out
}

pub fn parse_summary_csv(text: &str, path: &Path) -> Result<SummaryStats> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut head = None;
    let mut error_histogram = Vec::new();
    let mut steps: Vec<(usize, usize)> = Vec::new();
    let mut per_step = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || Error::parse(path, format!("line {}: malformed {:?} record", i + 1, rec.get(0).unwrap_or("")));
        let f = |k: usize| -> Result<f64> { rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(bad) };
        let u = |k: usize| -> Result<usize> { rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(bad) };
        match (rec.get(0), rec.len()) {
            (Some("runs"), 4) => head = Some((u(1)?, u(2)?, f(3)?)),
            (Some("error_bin"), 4) => error_histogram.push(HistogramBin { lo: f(1)?, hi: f(2)?, count: u(3)? }),
            (Some("steps_bin"), 3) => steps.push((u(1)?, u(2)?)),
            (Some("step"), 7) => per_step.push(StepStats {
                step: u(1)?,
                runs: u(2)?,
                mean_px: f(3)?,
                median_px: f(4)?,
                mean_mm: f(5)?,
                median_mm: f(6)?,
            }),
            _ => return Err(bad()),
        }
    }
    let (runs, successes, success_fraction) = head.ok_or_else(|| Error::parse(path, "missing runs record"))?;
    if steps.iter().enumerate().any(|(i, &(k, _))| i != k) {
        return Err(Error::parse(path, "steps_bin records must be consecutive from 0"));
    }
    Ok(SummaryStats {
        runs,
        successes,
        success_fraction,
        error_histogram,
        steps_histogram: steps.into_iter().map(|(_, n)| n).collect(),
        per_step,
    })
}

pub fn read_summary_csv(path: &Path) -> Result<SummaryStats> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_summary_csv(&text, path)
}

pub fn summary_text(s: &SummaryStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "runs: {}  successes: {}  success fraction: {:.3}", s.runs, s.successes, s.success_fraction);
    match s.median_steps_to_success() {
        Some(m) => _ = writeln!(out, "median steps to success: {m}"),
        None => _ = writeln!(out, "median steps to success: n/a"),
    }
    let _ = writeln!(out, "\nerror per step (px / mm)");
    let _ = writeln!(out, "{:>5} {:>5} {:>9} {:>9} {:>9} {:>9}", "step", "runs", "mean_px", "med_px", "mean_mm", "med_mm");
    for p in &s.per_step {
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            p.step, p.runs, p.mean_px, p.median_px, p.mean_mm, p.median_mm
        );
    }
    let _ = writeln!(out, "\nfinal error histogram (mm)");
    for b in &s.error_histogram {
        let _ = writeln!(out, "  [{:>4}, {:>4}) {}", b.lo, b.hi, b.count);
    }
    let _ = writeln!(out, "\nsteps to success");
    for (k, n) in s.steps_histogram.iter().enumerate() {
        let _ = writeln!(out, "  {k}: {n}");
    }
    out
}
