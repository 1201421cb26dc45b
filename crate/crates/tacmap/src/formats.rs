//! CSV and sidecar formats.
//!
//! | file            | columns                          |
//! |-----------------|----------------------------------|
//! | tactile frames  | one sensor row per line, frames separated by a blank line |
//! | descriptors     | 32 values per line, no header    |
//! | likelihood grid | `row,col,value`                  |
//! | beliefs         | `step,row,col,mass`              |
//! | path            | `index,row,col`                  |
//! | scene sidecar   | `key = value` lines next to the map PGM |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tacmap_core::features::DESCRIPTOR_LEN;
use tacmap_core::{Belief, Descriptor32, LikelihoodGrid, Path as TouchPath, Scene, State, StateSpace, TactileFrame};

use crate::error::{Error, Result};
use crate::pgm::{load_gray_image, write_pgm, PgmFormat};

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| Error::csv(path, e))).collect()
}

fn write_records<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in records {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_reals(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::parse(path, format!("line {lineno}: invalid number {t:?}"))))
        .collect()
}

/// Reads a recording: frames of equal shape separated by blank lines.
pub fn read_tactile_recording(path: &Path) -> Result<Vec<TactileFrame>> {
    let text = read_text(path)?;
    let mut frames = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut flush = |rows: &mut Vec<Vec<f64>>, lineno: usize| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::parse(path, format!("ragged frame ending at line {lineno}")));
        }
        let n = rows.len();
        let frame = TactileFrame::new(n, cols, rows.drain(..).flatten().collect())
            .map_err(|e| Error::parse(path, format!("frame ending at line {lineno}: {e}")))?;
        frames.push(frame);
        Ok(())
    };
    let mut last = 0;
    for (i, line) in text.lines().enumerate() {
        last = i + 1;
        if line.trim().is_empty() {
            flush(&mut rows, last)?;
        } else {
            rows.push(parse_reals(line, path, last)?);
        }
    }
    flush(&mut rows, last)?;
    if let Some(first) = frames.first() {
        let shape = (first.rows(), first.cols());
        if let Some(k) = frames.iter().position(|f| (f.rows(), f.cols()) != shape) {
            return Err(Error::parse(path, format!("frame {k} shape differs from frame 0")));
        }
    }
    Ok(frames)
}

pub fn write_tactile_recording(path: &Path, frames: &[TactileFrame]) -> Result<()> {
    let mut f = create(path)?;
    let mut out = String::new();
    for (k, frame) in frames.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for row in frame.data().chunks(frame.cols()) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_descriptors(path: &Path, descriptors: &[Descriptor32]) -> Result<()> {
    let mut out = String::new();
    for d in descriptors {
        let line: Vec<String> = d.values().iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_descriptors(path: &Path) -> Result<Vec<Descriptor32>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let values = parse_reals(line, path, i + 1)?;
        let arr: [f64; DESCRIPTOR_LEN] = values.try_into().map_err(|v: Vec<f64>| {
            Error::parse(path, format!("line {}: expected {DESCRIPTOR_LEN} values, found {}", i + 1, v.len()))
        })?;
        out.push(Descriptor32(arr));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

pub fn write_likelihood_csv(path: &Path, like: &LikelihoodGrid) -> Result<()> {
    let space = like.space();
    write_records(
        path,
        space.states().zip(like.values()).map(|(s, &value)| GridCell { row: s.row, col: s.col, value }),
    )
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridCell>> {
    read_records(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefCell {
    pub step: usize,
    pub row: usize,
    pub col: usize,
    pub mass: f64,
}

pub fn belief_cells(step: usize, bel: &Belief) -> impl Iterator<Item = BeliefCell> + '_ {
    bel.space().states().zip(bel.mass()).map(move |(s, &mass)| BeliefCell { step, row: s.row, col: s.col, mass })
}

pub fn write_belief_csv(path: &Path, beliefs: &[Belief]) -> Result<()> {
    write_records(path, beliefs.iter().enumerate().flat_map(|(k, b)| belief_cells(k, b)))
}

/// `(step, n_rows, n_cols, row-major mass)`.
pub type BeliefGrid = (usize, usize, usize, Vec<f64>);

/// Per-step belief grids from a belief CSV.
///
/// Every step must list each cell of a full rectangular grid exactly once.
pub fn read_belief_csv(path: &Path) -> Result<Vec<BeliefGrid>> {
    let cells: Vec<BeliefCell> = read_records(path)?;
    let mut steps: Vec<usize> = cells.iter().map(|c| c.step).collect();
    steps.sort_unstable();
    steps.dedup();
    let mut out = Vec::with_capacity(steps.len());
    for step in steps {
        let these: Vec<&BeliefCell> = cells.iter().filter(|c| c.step == step).collect();
        let n_rows = these.iter().map(|c| c.row).max().unwrap_or(0) + 1;
        let n_cols = these.iter().map(|c| c.col).max().unwrap_or(0) + 1;
        let mut mass = vec![f64::NAN; n_rows * n_cols];
        for c in &these {
            mass[c.row * n_cols + c.col] = c.mass;
        }
        if these.len() != mass.len() || mass.iter().any(|m| m.is_nan()) {
            return Err(Error::parse(path, format!("step {step} does not cover a full {n_rows}x{n_cols} grid")));
        }
        out.push((step, n_rows, n_cols, mass));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PathRecord {
    index: usize,
    row: usize,
    col: usize,
}

pub fn write_path_csv(path: &Path, touches: &TouchPath) -> Result<()> {
    write_records(
        path,
        touches.poses().iter().enumerate().map(|(index, s)| PathRecord { index, row: s.row, col: s.col }),
    )
}

pub fn read_path_csv(path: &Path) -> Result<TouchPath> {
    let mut records: Vec<PathRecord> = read_records(path)?;
    records.sort_by_key(|r| r.index);
    if records.iter().enumerate().any(|(i, r)| r.index != i) {
        return Err(Error::parse(path, "path indices must be 0..n without gaps"));
    }
    Ok(TouchPath::new(records.iter().map(|r| State::new(r.row, r.col)).collect())?)
}

/// Sidecar path for a scene map: `map.pgm` → `map.meta`.
pub fn sidecar_path(map_path: &Path) -> PathBuf {
    map_path.with_extension("meta")
}

/// Writes the map as a 16-bit PGM plus a `key = value` sidecar.
pub fn export_scene(map_path: &Path, scene: &Scene, extra: &[(&str, String)]) -> Result<()> {
    write_pgm(map_path, &scene.map, 65535, PgmFormat::Binary)?;
    let meta = sidecar_path(map_path);
    let mut text = format!(
        "rows = {}\ncols = {}\nmm_per_pixel = {}\n",
        scene.map.rows(),
        scene.map.cols(),
        scene.mm_per_pixel
    );
    for (k, v) in extra {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn read_sidecar(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn import_scene(map_path: &Path) -> Result<Scene> {
    let map = load_gray_image(map_path)?;
    let meta = sidecar_path(map_path);
    let mm = read_sidecar(&meta)?
        .into_iter()
        .find(|(k, _)| k == "mm_per_pixel")
        .ok_or_else(|| Error::parse(&meta, "missing mm_per_pixel"))?
        .1;
    let mm: f64 = mm.parse().map_err(|_| Error::parse(&meta, format!("invalid mm_per_pixel {mm:?}")))?;
    Ok(Scene::new(map, mm)?)
}

/// Writes the likelihood or belief grid of `space` as a heatmap PGM.
pub fn write_grid_heatmap(path: &Path, space: &StateSpace, values: &[f64]) -> Result<()> {
    crate::pgm::write_heatmap(path, values, space.n_rows(), space.n_cols(), 65535)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tacmap_core::filter::init_uniform;

    #[test]
    fn tactile_recording_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec.csv");
        let frames: Vec<TactileFrame> = (0..3)
            .map(|k| TactileFrame::new(14, 6, (0..84).map(|i| (i * (k + 1)) as f64 * 0.013).collect()).unwrap())
            .collect();
        write_tactile_recording(&p, &frames).unwrap();
        assert_eq!(read_tactile_recording(&p).unwrap(), frames);

        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_tactile_recording(&p).is_err());
        fs::write(&p, "1,-2\n").unwrap();
        assert!(read_tactile_recording(&p).is_err());
        fs::write(&p, "1,2\n\n\n1,2,3\n").unwrap();
        assert!(read_tactile_recording(&p).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let mut a = [0.0; DESCRIPTOR_LEN];
        a.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sqrt() / 7.0);
        let ds = vec![Descriptor32(a), Descriptor32::ZERO];
        write_descriptors(&p, &ds).unwrap();
        assert_eq!(read_descriptors(&p).unwrap(), ds);
        fs::write(&p, "1,2,3\n").unwrap();
        assert!(read_descriptors(&p).is_err());
    }

    #[test]
    fn belief_and_path_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let space = StateSpace::new(6, 7, 2, 3).unwrap();
        let a = init_uniform(&space);
        let b = Belief::delta(space, State::new(2, 1)).unwrap();
        let p = dir.path().join("b.csv");
        write_belief_csv(&p, &[a.clone(), b.clone()]).unwrap();
        let back = read_belief_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!((back[0].1, back[0].2), (space.n_rows(), space.n_cols()));
        assert_eq!(back[0].3, a.mass());
        assert_eq!(back[1].3, b.mass());

        let path = TouchPath::new(vec![State::new(1, 2), State::new(3, 0), State::new(0, 0)]).unwrap();
        let pp = dir.path().join("path.csv");
        write_path_csv(&pp, &path).unwrap();
        assert_eq!(read_path_csv(&pp).unwrap(), path);
        assert!(fs::read_to_string(&pp).unwrap().starts_with("index,row,col\n"));
    }

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = tacmap_core::simulator::make_shape_map(tacmap_core::ShapeSpec::Gecko, 40, 30, 3).unwrap();
        let p = dir.path().join("map.pgm");
        export_scene(&p, &scene, &[("shape", "gecko".into())]).unwrap();
        let back = import_scene(&p).unwrap();
        assert_eq!(back.mm_per_pixel, scene.mm_per_pixel);
        for (a, b) in scene.map.data().iter().zip(back.map.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
        assert!(read_sidecar(&sidecar_path(&p)).unwrap().contains(&("shape".into(), "gecko".into())));
    }
}
