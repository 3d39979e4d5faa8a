//! Binary basis and field files.
//!
//! Layout: 8 magic bytes, a little-endian `u32` metadata length, that many
//! bytes of UTF-8 JSON metadata, then little-endian `f64` arrays in the order
//! the metadata lists them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zk_core::basis::TraceKind;
use zk_core::{CoeffField, DomainConfig, SpectralBasis};

use crate::error::{AppError, Result};

pub const BASIS_MAGIC: &[u8; 8] = b"ZKBASIS1";
pub const FIELD_MAGIC: &[u8; 8] = b"ZKFIELD1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTolerances {
    /// `max |G − I|` over the Gram matrix of all modes.
    pub gram: f64,
    /// Largest boundary-condition residual over all modes.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub config: DomainConfig,
    pub basis_hash: u64,
    pub tolerances: BasisTolerances,
    pub x_betas: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `[x, y, z]` indices of each tensor mode, in coefficient order.
    pub modes: Vec<[usize; 3]>,
    pub arrays: Vec<ArrayInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisFile {
    pub meta: BasisMeta,
    pub arrays: Vec<Vec<f64>>,
}

impl BasisFile {
    pub fn array(&self, name: &str) -> Option<&[f64]> {
        let i = self.meta.arrays.iter().position(|a| a.name == name)?;
        Some(&self.arrays[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub time: f64,
    pub step: u64,
    pub n: usize,
    pub d: usize,
    pub basis_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub meta: FieldMeta,
    pub coeffs: Vec<f64>,
}

/// Snapshot the basis: quadrature, x-mode tables and endpoint data.
pub fn basis_file(basis: &SpectralBasis, tolerances: BasisTolerances) -> BasisFile {
    let grid = basis.grid();
    let xr = &grid.x_rule;
    let pr = &grid.perp_rule;
    let mut names = Vec::new();
    let mut arrays = Vec::new();
    let mut push = |name: String, v: Vec<f64>| {
        names.push(ArrayInfo { name, len: v.len() });
        arrays.push(v);
    };
    push("x_nodes".into(), xr.nodes.clone());
    push("x_weights".into(), xr.weights.clone());
    push("perp_nodes".into(), pr.nodes.clone());
    push("perp_weights".into(), pr.weights.clone());
    for order in 0..=2 {
        let table = basis
            .x_modes()
            .iter()
            .flat_map(|m| xr.nodes.iter().map(move |&x| m.value(x, order)))
            .collect();
        push(format!("x_modes_d{order}"), table);
    }
    let ends = basis
        .x_modes()
        .iter()
        .flat_map(|m| [m.value(0.0, 1), m.value(1.0, 1), m.value(0.0, 2), m.value(1.0, 2)])
        .collect();
    push("x_endpoints".into(), ends);
    let modes = basis.modes().iter().map(|m| [m.x, m.y, m.z]).collect();
    BasisFile {
        meta: BasisMeta {
            config: basis.config().clone(),
            basis_hash: basis.id(),
            tolerances,
            x_betas: basis.x_modes().iter().map(|m| m.beta).collect(),
            eigenvalues: basis.eigenvalues().to_vec(),
            modes,
            arrays: names,
        },
        arrays,
    }
}

fn encode(magic: &[u8; 8], meta: &impl Serialize, arrays: &[&[f64]]) -> Vec<u8> {
    let json = serde_json::to_vec(meta).expect("metadata serializes");
    let len = u32::try_from(json.len()).expect("metadata below 4 GiB");
    let total: usize = arrays.iter().map(|a| a.len()).sum();
    let mut out = Vec::with_capacity(12 + json.len() + 8 * total);
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for a in arrays {
        for v in *a {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Split into metadata bytes and the trailing float payload.
fn decode<'a>(path: &Path, magic: &[u8; 8], bytes: &'a [u8]) -> Result<(&'a [u8], Vec<f64>)> {
    let bad = |why: &str| AppError::format(path, why);
    if bytes.len() < 12 || &bytes[..8] != magic {
        return Err(bad(&format!("missing {} header", String::from_utf8_lossy(magic))));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(bad("metadata length runs past the end of the file"));
    }
    let (meta, payload) = body.split_at(len);
    if payload.len() % 8 != 0 {
        return Err(bad("payload is not a whole number of f64 values"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((meta, values))
}

pub fn encode_basis(file: &BasisFile) -> Vec<u8> {
    let refs: Vec<&[f64]> = file.arrays.iter().map(|a| a.as_slice()).collect();
    encode(BASIS_MAGIC, &file.meta, &refs)
}

pub fn decode_basis(path: &Path, bytes: &[u8]) -> Result<BasisFile> {
    let (meta, values) = decode(path, BASIS_MAGIC, bytes)?;
    let meta: BasisMeta =
        serde_json::from_slice(meta).map_err(|e| AppError::format(path, format!("metadata: {e}")))?;
    let total: usize = meta.arrays.iter().map(|a| a.len).sum();
    if total != values.len() {
        return Err(AppError::format(
            path,
            format!("metadata declares {total} values, payload has {}", values.len()),
        ));
    }
    let mut arrays = Vec::with_capacity(meta.arrays.len());
    let mut at = 0;
    for a in &meta.arrays {
        arrays.push(values[at..at + a.len].to_vec());
        at += a.len;
    }
    Ok(BasisFile { meta, arrays })
}

pub fn field_file(basis: &SpectralBasis, field: &CoeffField, time: f64, step: u64) -> FieldFile {
    FieldFile {
        meta: FieldMeta {
            time,
            step,
            n: field.coeffs.len(),
            d: basis.config().d,
            basis_hash: basis.id(),
        },
        coeffs: field.coeffs.clone(),
    }
}

pub fn encode_field(file: &FieldFile) -> Vec<u8> {
    encode(FIELD_MAGIC, &file.meta, &[&file.coeffs])
}

pub fn decode_field(path: &Path, bytes: &[u8]) -> Result<FieldFile> {
    let (meta, coeffs) = decode(path, FIELD_MAGIC, bytes)?;
    let meta: FieldMeta =
        serde_json::from_slice(meta).map_err(|e| AppError::format(path, format!("metadata: {e}")))?;
    if meta.n != coeffs.len() {
        return Err(AppError::format(
            path,
            format!("metadata declares {} coefficients, payload has {}", meta.n, coeffs.len()),
        ));
    }
    Ok(FieldFile { meta, coeffs })
}

pub fn read_basis(path: &Path) -> Result<BasisFile> {
    decode_basis(path, &fs::read(path).map_err(|e| AppError::io(path, e))?)
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    decode_field(path, &fs::read(path).map_err(|e| AppError::io(path, e))?)
}

/// One row of `path.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub step: u64,
    pub time: f64,
    pub l2_norm: f64,
    pub xi1_norm: f64,
    pub trace_ux0_norm: f64,
    pub trace_ux1_norm: f64,
}

impl PathRow {
    pub fn new(basis: &SpectralBasis, field: &CoeffField, step: u64, time: f64) -> Result<Self> {
        Ok(PathRow {
            step,
            time,
            l2_norm: field.l2_norm(),
            xi1_norm: basis.xi1_norm_sq(&field.coeffs).sqrt(),
            trace_ux0_norm: basis.eval_trace(field, TraceKind::UxAt0)?.norm,
            trace_ux1_norm: basis.eval_trace(field, TraceKind::UxAt1)?.norm,
        })
    }
}

/// Serialize records under their field names; header-only when empty.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let err = |e: csv::Error| AppError::Config(format!("csv encoding: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| AppError::Config(format!("csv encoding: {e}")))
}

pub const PATH_COLUMNS: [&str; 6] = ["step", "time", "l2_norm", "xi1_norm", "trace_ux0_norm", "trace_ux1_norm"];
