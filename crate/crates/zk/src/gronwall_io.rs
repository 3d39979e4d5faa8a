//! `paths.csv` input for the stochastic Gronwall check.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use zk_core::gronwall::verify_stochastic_gronwall;
use zk_core::{GronwallReport, GronwallVariant, PathProcess};

use crate::error::{AppError, Result};
use crate::report::ReportRow;

#[derive(Debug, Deserialize)]
struct Record {
    path_id: u64,
    time: f64,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Y")]
    y: f64,
    #[serde(rename = "Z")]
    z: f64,
    #[serde(rename = "M")]
    m: f64,
}

/// Parse `path_id, time, X, Y, Z, M` rows into one process per id, ordered by
/// id. Rows of one id must have increasing times.
pub fn parse_paths(path: &Path, text: &str) -> Result<Vec<PathProcess>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut by_id: BTreeMap<u64, PathProcess> = BTreeMap::new();
    for (line, rec) in rdr.deserialize::<Record>().enumerate() {
        let r = rec.map_err(|e| AppError::format(path, format!("row {}: {e}", line + 2)))?;
        let p = by_id.entry(r.path_id).or_insert_with(|| PathProcess {
            times: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            m: Vec::new(),
        });
        if p.times.last().is_some_and(|&t| !(r.time > t)) {
            return Err(AppError::format(
                path,
                format!("path {} has non-increasing time {} at row {}", r.path_id, r.time, line + 2),
            ));
        }
        p.times.push(r.time);
        p.x.push(r.x);
        p.y.push(r.y);
        p.z.push(r.z);
        p.m.push(r.m);
    }
    if by_id.is_empty() {
        return Err(AppError::format(path, "no paths"));
    }
    Ok(by_id.into_values().collect())
}

pub fn read_paths(path: &Path) -> Result<Vec<PathProcess>> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_paths(path, &text)
}

pub fn parse_variant(s: &str) -> Result<GronwallVariant> {
    match s {
        "full" => Ok(GronwallVariant::Full),
        "weakened" => Ok(GronwallVariant::Weakened),
        other => Err(AppError::Config(format!("variant {other:?} is not full or weakened"))),
    }
}

pub fn run_gronwall(paths: &[PathProcess], c0: f64, variant: GronwallVariant) -> Result<(GronwallReport, Vec<ReportRow>)> {
    let r = verify_stochastic_gronwall(paths, c0, variant)?;
    let tag = "stochastic Gronwall lemma";
    let rows = vec![
        ReportRow::at_most(
            "gronwall_hypothesis_violations",
            tag,
            r.violations as f64 / r.windows as f64,
            zk_core::gronwall::HYPOTHESIS_FAILURE_SHARE,
        ),
        ReportRow::at_most("gronwall_stopping_count", tag, r.n as f64, r.n_bound as f64),
        ReportRow::at_most("gronwall_kappa", tag, r.kappa, f64::INFINITY),
        ReportRow {
            check_id: "gronwall_conclusion".into(),
            paper_ref: tag.into(),
            value: r.conclusion_lhs,
            tolerance: match variant {
                GronwallVariant::Full => r.conclusion_rhs,
                GronwallVariant::Weakened => 1e-8,
            },
            pass: r.pass,
        },
    ];
    Ok((r, rows))
}
