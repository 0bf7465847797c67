//! File formats: mixing measures as JSON, datasets as CSV plus a JSON
//! sidecar carrying `{seed, n, source}`.
//!
//! The sidecar of `data.csv` is `data.meta.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{Dataset, MixingMeasure};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, message: impl ToString) -> Error {
    Error::Parse { path: path.to_path_buf(), message: message.to_string() }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e))?;
    fs::write(path, s + "\n").map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&s).map_err(|e| parse_err(path, e))
}

pub fn read_measure(path: &Path) -> Result<MixingMeasure> {
    read_json(path)
}

pub fn write_measure(path: &Path, m: &MixingMeasure) -> Result<()> {
    write_json(path, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub n: usize,
    pub source: String,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e))?;
    let header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(|e| parse_err(path, e))?;
    for p in data.points() {
        w.write_record(p.iter().map(|v| format!("{v:?}"))).map_err(|e| parse_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = DatasetMeta { seed: data.seed, n: data.len(), source: data.source.clone() };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a dataset. A missing sidecar yields seed 0 and the file name as
/// source; a present sidecar must agree on `n`.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    let header = r.headers().map_err(|e| parse_err(path, e))?.clone();
    let dim = header.len();
    for (j, h) in header.iter().enumerate() {
        if h.trim() != format!("x{}", j + 1) {
            return Err(parse_err(path, format!("expected header column x{}, found {h:?}", j + 1)));
        }
    }
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        if rec.len() != dim {
            return Err(parse_err(path, "ragged row"));
        }
        for v in rec.iter() {
            points.push(v.trim().parse::<f64>().map_err(|e| parse_err(path, e))?);
        }
    }
    let side = sidecar_path(path);
    let (seed, source) = if side.exists() {
        let meta: DatasetMeta = read_json(&side)?;
        if meta.n * dim != points.len() {
            return Err(parse_err(&side, format!("sidecar says n = {}, file has {} rows", meta.n, points.len() / dim.max(1))));
        }
        (meta.seed, meta.source)
    } else {
        (0, path.display().to_string())
    };
    Dataset::new(dim, points, seed, source).map_err(|e| parse_err(path, e))
}
