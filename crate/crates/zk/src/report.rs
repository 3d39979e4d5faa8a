//! Check reports as CSV or NDJSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ReportFormat;
use crate::error::{AppError, Result};

pub const REPORT_COLUMNS: [&str; 5] = ["check_id", "paper_ref", "value", "tolerance", "pass"];

/// One checked quantity. `paper_ref` names the identity or estimate the row
/// exercises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub check_id: String,
    pub paper_ref: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportRow {
    /// Row passing when `value ≤ tolerance`.
    pub fn at_most(check_id: &str, paper_ref: &str, value: f64, tolerance: f64) -> Self {
        ReportRow {
            check_id: check_id.to_string(),
            paper_ref: paper_ref.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Row passing when `value ≥ tolerance`.
    pub fn at_least(check_id: &str, paper_ref: &str, value: f64, tolerance: f64) -> Self {
        ReportRow {
            pass: value >= tolerance,
            ..Self::at_most(check_id, paper_ref, value, tolerance)
        }
    }

    /// Row passing when `value` lies in `[lo, hi]`; the tolerance column
    /// records the half-width around the midpoint.
    pub fn within(check_id: &str, paper_ref: &str, value: f64, lo: f64, hi: f64) -> Self {
        ReportRow {
            pass: (lo..=hi).contains(&value),
            tolerance: 0.5 * (hi - lo),
            ..Self::at_most(check_id, paper_ref, value, 0.0)
        }
    }
}

pub fn render_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    crate::format::csv_bytes(&REPORT_COLUMNS, rows)
}

pub fn render_ndjson(rows: &[ReportRow]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("report rows serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_report(path: &Path, rows: &[ReportRow], format: ReportFormat) -> Result<()> {
    let bytes = match format {
        ReportFormat::Csv => render_csv(rows)?,
        ReportFormat::Ndjson => render_ndjson(rows),
    };
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| AppError::io(path, e))?);
    f.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    f.flush().map_err(|e| AppError::io(path, e))
}

/// Choose the format from an explicit extension, else from the config.
pub fn format_for(path: &Path, fallback: ReportFormat) -> ReportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ndjson") | Some("jsonl") => ReportFormat::Ndjson,
        Some("csv") => ReportFormat::Csv,
        _ => fallback,
    }
}
