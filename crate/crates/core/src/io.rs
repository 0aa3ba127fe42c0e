//! CSV helpers for the per-segment tables exchanged between subcommands.
//!
//! Every table is keyed by its first column (`segment_id` or `sample_id`).
//! Floats are written in Rust's shortest round-trip form, so a write
//! followed by a read reproduces values exactly.

use std::io::{Read, Write};

use ndarray::Array2;
use thiserror::Error;

use crate::contrastive::Sample;
use crate::lts::LtsLabel;
use crate::smoothing::CategoricalDistribution;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("empty table")]
    Empty,
}

fn parse_err(line: u64, message: impl Into<String>) -> TableError {
    TableError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: u64) -> Result<f64, TableError> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("not a finite number: {field:?}")))
}

fn numbered_header(key: &str, prefix: &str, n: usize, extra: Option<&str>) -> Vec<String> {
    let mut h = vec![key.to_string()];
    h.extend((1..=n).map(|i| format!("{prefix}{i}")));
    h.extend(extra.map(str::to_string));
    h
}

/// Rows of `key, p_1..p_K`.
pub fn write_distributions<W: Write>(writer: W, ids: &[String], dists: &[CategoricalDistribution]) -> Result<(), TableError> {
    let k = dists.first().map_or(0, CategoricalDistribution::len);
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(numbered_header("segment_id", "p_", k, None))?;
    for (id, d) in ids.iter().zip(dists) {
        let mut row = vec![id.clone()];
        row.extend(d.probs().iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_distributions<R: Read>(reader: R) -> Result<(Vec<String>, Vec<CategoricalDistribution>), TableError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(parse_err(1, "expected segment_id followed by probability columns"));
    }
    let (mut ids, mut dists) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let probs = rec.iter().skip(1).map(|f| parse_f64(f, line)).collect::<Result<Vec<_>, _>>()?;
        let d = CategoricalDistribution::new(probs).map_err(|e| parse_err(line, e.to_string()))?;
        ids.push(rec[0].to_string());
        dists.push(d);
    }
    Ok((ids, dists))
}

/// Rows of `segment_id, <column>` with integer labels.
pub fn write_labels<W: Write>(writer: W, column: &str, ids: &[String], labels: &[u32]) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["segment_id", column])?;
    for (id, l) in ids.iter().zip(labels) {
        wtr.write_record([id.as_str(), &l.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the first two columns of a labels table; extra columns are ignored.
/// Blank labels are skipped.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, u32)>, TableError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 2 {
            return Err(parse_err(line, "expected segment_id and label columns"));
        }
        let field = rec[1].trim();
        if field.is_empty() {
            continue;
        }
        let label = field
            .parse::<u32>()
            .map_err(|_| parse_err(line, format!("not a label: {field:?}")))?;
        out.push((rec[0].to_string(), label));
    }
    Ok(out)
}

/// Rows of `key, <prefix>1..<prefix>d`.
pub fn write_matrix<W: Write>(writer: W, key: &str, prefix: &str, ids: &[String], m: &Array2<f64>) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(numbered_header(key, prefix, m.ncols(), None))?;
    for (id, row) in ids.iter().zip(m.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an id column followed by numeric columns. A trailing `y` column, if
/// present, is dropped.
pub fn read_matrix<R: Read>(reader: R) -> Result<(Vec<String>, Array2<f64>), TableError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut width = headers.len();
    if headers.iter().next_back() == Some("y") {
        width -= 1;
    }
    if width < 2 {
        return Err(parse_err(1, "expected an id column followed by numeric columns"));
    }
    let (mut ids, mut flat) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        for f in rec.iter().take(width).skip(1) {
            flat.push(parse_f64(f, line)?);
        }
        ids.push(rec[0].to_string());
    }
    let m = Array2::from_shape_vec((ids.len(), width - 1), flat).expect("rectangular by construction");
    Ok((ids, m))
}

/// Rows of `segment_id, lts_pred, p1..p4`.
pub fn write_lts_predictions<W: Write>(
    writer: W,
    ids: &[String],
    labels: &[LtsLabel],
    probs: &[CategoricalDistribution],
) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["segment_id".to_string(), "lts_pred".to_string()];
    header.extend((1..=4).map(|i| format!("p{i}")));
    wtr.write_record(&header)?;
    for ((id, y), p) in ids.iter().zip(labels).zip(probs) {
        let mut rec = vec![id.clone(), y.value().to_string()];
        rec.extend(p.probs().iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rows of `sample_id, x_1..x_p, y`.
pub fn write_samples<W: Write>(writer: W, ids: &[String], samples: &[Sample]) -> Result<(), TableError> {
    let p = samples.first().map_or(0, |s| s.x.len());
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(numbered_header("sample_id", "x_", p, Some("y")))?;
    for (id, s) in ids.iter().zip(samples) {
        let mut rec = vec![id.clone()];
        rec.extend(s.x.iter().map(f64::to_string));
        rec.push(s.y.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Sample>), TableError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || headers.iter().next_back() != Some("y") {
        return Err(parse_err(1, "expected sample_id, x_1..x_p, y"));
    }
    let p = headers.len() - 2;
    let (mut ids, mut samples) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let x = rec.iter().skip(1).take(p).map(|f| parse_f64(f, line)).collect::<Result<Vec<_>, _>>()?;
        let y = rec[p + 1]
            .trim()
            .parse::<u8>()
            .ok()
            .filter(|&y| y >= 1)
            .ok_or_else(|| parse_err(line, format!("bad label {:?}", &rec[p + 1])))?;
        ids.push(rec[0].to_string());
        samples.push(Sample { x, y });
    }
    if samples.is_empty() {
        return Err(TableError::Empty);
    }
    Ok((ids, samples))
}
