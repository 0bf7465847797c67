//! Report output: rows as CSV, summary and metadata as JSON.

use std::path::Path;

use serde::Serialize;

use super::{header, ExperimentKind, ExperimentReport, Metadata, Row, Summary};
use crate::error::{Error, Result};
use crate::io::write_json;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// Rows only.
    Csv,
    /// Summary and metadata.
    Json,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    summary: &'a Summary,
    metadata: &'a Metadata,
}

fn parse_err(path: &Path, e: impl ToString) -> Error {
    Error::Parse { path: path.to_path_buf(), message: e.to_string() }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => String::new(),
    }
}

pub fn emit(report: &ExperimentReport, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(path, &SummaryFile { summary: &report.summary, metadata: &report.metadata }),
        Format::Csv => {
            let kind = report.metadata.config.experiment;
            let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e))?;
            w.write_record(header(kind)).map_err(|e| parse_err(path, e))?;
            for r in &report.rows {
                let mut rec = vec![
                    kind.name().to_string(),
                    r.n.to_string(),
                    r.d.to_string(),
                    cell(r.t),
                    r.rep.to_string(),
                    r.seed.to_string(),
                ];
                rec.extend(r.values.iter().map(|v| cell(*v)));
                rec.push(r.error.clone().unwrap_or_default());
                w.write_record(&rec).map_err(|e| parse_err(path, e))?;
            }
            w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
        }
    }
}

/// Writes `rows.csv` and `summary.json` into `dir`, creating it if needed.
pub fn emit_dir(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    emit(report, &dir.join("rows.csv"), Format::Csv)?;
    emit(report, &dir.join("summary.json"), Format::Json)
}

fn opt_f64(path: &Path, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|e| parse_err(path, format!("bad number {s:?}: {e}")))
}

fn int<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| parse_err(path, format!("bad integer {s:?}: {e}")))
}

/// Parses a `rows.csv` written by [`emit`].
pub fn read_rows_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    let head: Vec<String> = r.headers().map_err(|e| parse_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    let mut kind: Option<ExperimentKind> = None;
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let k: ExperimentKind = rec[0].parse().map_err(|e: Error| parse_err(path, e))?;
        if kind.is_none() {
            if head != header(k) {
                return Err(parse_err(path, format!("header does not match the {k} column list")));
            }
            kind = Some(k);
        }
        let m = k.columns().len();
        if rec.len() != 7 + m {
            return Err(parse_err(path, "ragged row"));
        }
        let values = (0..m).map(|j| opt_f64(path, &rec[6 + j])).collect::<Result<Vec<_>>>()?;
        let err = &rec[6 + m];
        rows.push(Row {
            experiment: k,
            n: int(path, &rec[1])?,
            d: int(path, &rec[2])?,
            t: opt_f64(path, &rec[3])?,
            rep: int(path, &rec[4])?,
            seed: int(path, &rec[5])?,
            values,
            error: (!err.is_empty()).then(|| err.to_string()),
        });
    }
    Ok(rows)
}
