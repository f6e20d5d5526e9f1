//! CSV and JSON files for curves, trajectories and reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{from_samples, Curve, CurveError};
use crate::flow::Trajectory;
use crate::repar::ReparamCurve;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(fs_err(path))
}

/// Arc-length curve with tangents, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub dim: usize,
    pub length: f64,
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub tangents: Vec<Vec<f64>>,
}

impl CurveRecord {
    pub fn from_curve(curve: &Curve) -> Self {
        Self {
            dim: curve.dim(),
            length: curve.length(),
            params: curve.params().to_vec(),
            points: (0..curve.len()).map(|i| curve.point(i).to_vec()).collect(),
            tangents: (0..curve.len()).map(|i| curve.tangent(i).to_vec()).collect(),
        }
    }

    pub fn into_curve(self) -> std::result::Result<Curve, CurveError> {
        let points = self.points.into_iter().flatten().collect();
        let tangents = self.tangents.into_iter().flatten().collect();
        Curve::from_parts(self.dim, self.params, points, tangents)
    }
}

/// Rows of numbers; a first row that does not parse is taken as a header.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(IoError::Parse { path: path.to_path_buf(), line: k + 1, message: e.to_string() });
            }
        }
    }
    Ok(rows)
}

/// `.json` files hold a [`CurveRecord`]; anything else is a CSV of raw
/// points, resampled to `n` arc-length samples.
pub fn read_curve(path: &Path, n: usize) -> Result<Curve> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let record: CurveRecord = read_json(path)?;
        return Ok(record.into_curve()?);
    }
    let raw = read_points_csv(path)?;
    Ok(from_samples(&raw, n)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(fs_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    writeln!(w).and_then(|_| w.flush()).map_err(fs_err(path))
}

fn write_rows<W: Write>(out: W, header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn coords(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (1..=dim).map(move |d| format!("{prefix}{d}"))
}

/// Columns `t, x1..xn, d1..dn`.
pub fn write_curve_csv<W: Write>(out: W, curve: &Curve) -> std::result::Result<(), csv::Error> {
    let header = std::iter::once("t".to_string()).chain(coords("x", curve.dim())).chain(coords("d", curve.dim())).collect();
    let rows = (0..curve.len()).map(|i| {
        let mut r = vec![curve.param(i)];
        r.extend_from_slice(curve.point(i));
        r.extend_from_slice(curve.tangent(i));
        r
    });
    write_rows(out, header, rows)
}

/// Columns `s, x1..xn, speed`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> std::result::Result<(), csv::Error> {
    let header = std::iter::once("s".to_string()).chain(coords("x", traj.dim)).chain(std::iter::once("speed".into())).collect();
    let rows = (0..traj.len()).map(|k| {
        let mut r = vec![traj.times[k]];
        r.extend_from_slice(traj.state(k));
        r.push(traj.speeds[k]);
        r
    });
    write_rows(out, header, rows)
}

/// Columns `s, t, x1..xn, v1..vn` for `γ̃(s) = γ(t)`.
pub fn write_reparam_csv<W: Write>(out: W, rc: &ReparamCurve) -> std::result::Result<(), csv::Error> {
    let header = ["s".to_string(), "t".to_string()].into_iter().chain(coords("x", rc.dim)).chain(coords("v", rc.dim)).collect();
    let rows = (0..rc.len()).map(|k| {
        let mut r = vec![rc.times[k], rc.arc_params[k]];
        r.extend_from_slice(rc.point(k));
        r.extend_from_slice(rc.velocity(k));
        r
    });
    write_rows(out, header, rows)
}

pub fn save_csv<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> std::result::Result<(), csv::Error>,
{
    let w = create(path)?;
    write(w).map_err(|source| IoError::Csv { path: path.to_path_buf(), source })
}
