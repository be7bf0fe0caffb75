//! Interval traces as CSV or JSON.
//!
//! CSV has exactly the columns `t,vehicle,coord,lower,upper`, with numbers
//! in `{:.16e}` form (17 significant digits) so that reading a file back
//! reproduces every value bit for bit. JSON carries the same records plus
//! optional truth samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes, IoError};
use crate::predictor::IntervalTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub t: f64,
    pub vehicle: String,
    pub coord: String,
    pub lower: f64,
    pub upper: f64,
    /// Values of sampled realisations at `t`, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
}

/// One record per sample and coordinate; `coords` labels the state entries.
pub fn trajectory_records(
    traj: &IntervalTrajectory,
    vehicle: &str,
    coords: &[&str],
) -> Vec<TraceRecord> {
    let mut out = Vec::with_capacity(traj.times.len() * coords.len());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (i, coord) in coords.iter().enumerate() {
            out.push(TraceRecord {
                t: *t,
                vehicle: vehicle.to_string(),
                coord: coord.to_string(),
                lower: s.lower()[i],
                upper: s.upper()[i],
                truth: None,
            });
        }
    }
    out
}

fn check(records: &[TraceRecord]) -> Result<(), IoError> {
    for (k, r) in records.iter().enumerate() {
        if r.lower.is_nan() || r.upper.is_nan() || r.lower > r.upper {
            return Err(IoError::Validation(format!(
                "trace record {k} violates lower <= upper"
            )));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: String,
    vehicle: String,
    coord: String,
    lower: String,
    upper: String,
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn traces_to_csv(records: &[TraceRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["t", "vehicle", "coord", "lower", "upper"])
        .expect("in-memory write");
    for r in records {
        w.serialize(CsvRow {
            t: sci(r.t),
            vehicle: r.vehicle.clone(),
            coord: r.coord.clone(),
            lower: sci(r.lower),
            upper: sci(r.upper),
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn traces_to_json(records: &[TraceRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("finite records");
    s.push('\n');
    s
}

pub fn parse_csv_traces(text: &str) -> Result<Vec<TraceRecord>, IoError> {
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rd.headers().map_err(IoError::csv)?;
    if header != vec!["t", "vehicle", "coord", "lower", "upper"] {
        return Err(IoError::Validation(
            "CSV header must be t,vehicle,coord,lower,upper".into(),
        ));
    }
    let mut out = Vec::new();
    for row in rd.deserialize::<CsvRow>() {
        let row = row.map_err(IoError::csv)?;
        let num = |s: &str, col: &str| {
            s.parse::<f64>()
                .map_err(|_| IoError::Validation(format!("column {col} is not a number: {s}")))
        };
        out.push(TraceRecord {
            t: num(&row.t, "t")?,
            vehicle: row.vehicle,
            coord: row.coord,
            lower: num(&row.lower, "lower")?,
            upper: num(&row.upper, "upper")?,
            truth: None,
        });
    }
    check(&out)?;
    Ok(out)
}

pub fn parse_json_traces(text: &str) -> Result<Vec<TraceRecord>, IoError> {
    let out: Vec<TraceRecord> = serde_json::from_str(text).map_err(IoError::parse)?;
    check(&out)?;
    Ok(out)
}

pub fn write_traces(
    records: &[TraceRecord],
    format: TraceFormat,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let text = match format {
        TraceFormat::Csv => traces_to_csv(records),
        TraceFormat::Json => traces_to_json(records),
    };
    write_bytes(path.as_ref(), text.as_bytes())
}

pub fn read_traces(
    path: impl AsRef<Path>,
    format: TraceFormat,
) -> Result<Vec<TraceRecord>, IoError> {
    let text = read_text(path.as_ref())?;
    match format {
        TraceFormat::Csv => parse_csv_traces(&text),
        TraceFormat::Json => parse_json_traces(&text),
    }
}
