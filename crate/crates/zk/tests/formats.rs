use std::path::Path;

use zk::error::AppError;
use zk::format::{
    basis_file, csv_bytes, decode_basis, decode_field, encode_basis, encode_field, field_file, read_basis, read_field,
    BasisTolerances, PathRow, BASIS_MAGIC, FIELD_MAGIC, PATH_COLUMNS,
};
use zk::report::write_bytes;
use zk::suites::{boundary_residual, gram_defect, random_field};
use zk_core::{DomainConfig, SpectralBasis, TransverseBc};

fn basis() -> SpectralBasis {
    SpectralBasis::build(DomainConfig::new(1, 6, 5, TransverseBc::Dirichlet)).unwrap()
}

fn p() -> &'static Path {
    Path::new("mem")
}

fn is_format_error<T: std::fmt::Debug>(r: Result<T, AppError>) -> bool {
    matches!(r, Err(AppError::Format { .. }))
}

#[test]
fn basis_file_round_trips() {
    let b = basis();
    let tol = BasisTolerances {
        gram: gram_defect(&b),
        boundary: boundary_residual(&b),
    };
    let file = basis_file(&b, tol);
    let bytes = encode_basis(&file);
    assert_eq!(&bytes[..8], BASIS_MAGIC);
    let back = decode_basis(p(), &bytes).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.meta.basis_hash, b.id());
    assert_eq!(back.meta.eigenvalues, b.eigenvalues());
    assert_eq!(back.meta.modes.len(), b.len());
    let nodes = back.array("x_nodes").unwrap();
    assert_eq!(nodes.len(), b.config().quad_x);
    assert_eq!(back.array("x_modes_d0").unwrap().len(), 6 * nodes.len());
    assert!(back.meta.tolerances.gram < 1e-10 && back.meta.tolerances.boundary < 1e-8);
}

#[test]
fn field_file_round_trips_bitwise() {
    let b = basis();
    let u = random_field(&b, 3, 0);
    let file = field_file(&b, &u, 0.125, 125);
    let bytes = encode_field(&file);
    assert_eq!(&bytes[..8], FIELD_MAGIC);
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 12 + len + 8 * b.len());
    let back = decode_field(p(), &bytes).unwrap();
    assert_eq!(back.meta.step, 125);
    assert_eq!(back.meta.time, 0.125);
    assert_eq!(back.meta.basis_hash, b.id());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.coeffs), bits(&u.coeffs));
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let b = basis();
    let u = random_field(&b, 5, 0);
    let path = dir.path().join("s.zkf");
    write_bytes(&path, &encode_field(&field_file(&b, &u, 1.0, 1000))).unwrap();
    assert_eq!(read_field(&path).unwrap().coeffs, u.coeffs);
    let tol = BasisTolerances { gram: 0.0, boundary: 0.0 };
    let bpath = dir.path().join("b.zkb");
    write_bytes(&bpath, &encode_basis(&basis_file(&b, tol))).unwrap();
    assert_eq!(read_basis(&bpath).unwrap().meta.basis_hash, b.id());
}

#[test]
fn corrupt_files_are_format_errors() {
    let b = basis();
    let good = encode_field(&field_file(&b, &random_field(&b, 1, 0), 0.0, 0));
    let mut wrong_magic = good.clone();
    wrong_magic[0] = b'X';
    assert!(is_format_error(decode_field(p(), &wrong_magic)));
    assert!(is_format_error(decode_basis(p(), &good)));
    assert!(is_format_error(decode_field(p(), &good[..good.len() - 3])));
    assert!(is_format_error(decode_field(p(), &good[..good.len() - 8])));
    assert!(is_format_error(decode_field(p(), &good[..10])));
    let mut long_meta = good.clone();
    long_meta[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(is_format_error(decode_field(p(), &long_meta)));
    let e = decode_field(p(), &wrong_magic).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let e = read_field(Path::new("/nonexistent/zk/snap.zkf")).unwrap_err();
    assert!(matches!(e, AppError::Io { .. }));
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn path_csv_has_fixed_columns() {
    let b = basis();
    let u = random_field(&b, 2, 0);
    let rows = vec![PathRow::new(&b, &u, 0, 0.0).unwrap(), PathRow::new(&b, &u, 10, 0.01).unwrap()];
    let text = String::from_utf8(csv_bytes(&PATH_COLUMNS, &rows).unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], PATH_COLUMNS.join(","));
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("10,0.01,"));
    let empty: Vec<PathRow> = Vec::new();
    assert_eq!(csv_bytes(&PATH_COLUMNS, &empty).unwrap(), format!("{}\n", PATH_COLUMNS.join(",")).into_bytes());
}
