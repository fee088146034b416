//! Text format for density matrices:
//!
//! ```text
//! qubits 2
//! #@ source = tomography run 7
//! 0.5 0
//! 0 0
//! ...
//! ```
//!
//! The header is followed by the `4^N` entries in row-major order, one
//! `re im` pair per line. Lines starting with `#@` carry `key = value`
//! metadata; other `#` lines are comments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::DensityMatrix;

/// Hermiticity deviation tolerated in ingested files.
pub const INGEST_HERMITIAN_TOL: f64 = 1e-8;
/// Trace deviation tolerated in ingested files.
pub const INGEST_TRACE_TOL: f64 = 1e-6;
/// Eigenvalues below this are rejected outright; between it and
/// `-NEGATIVITY_TOL` they may be clipped.
pub const REPAIR_THRESHOLD: f64 = -1e-6;

const MAX_QUBITS: usize = 12;

#[derive(Clone, Debug, Default)]
pub struct ReadOptions {
    /// Clip small negative eigenvalues instead of rejecting the matrix.
    pub repair: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrixFile {
    pub matrix: DensityMatrix,
    pub metadata: BTreeMap<String, String>,
}

impl DensityMatrixFile {
    pub fn num_qubits(&self) -> usize {
        self.matrix.qubits()
    }
}

/// Parses and validates a density matrix file's contents.
pub fn parse_density_matrix(text: &str, source_name: &str, opts: &ReadOptions) -> Result<DensityMatrixFile> {
    let mut metadata = BTreeMap::new();
    let mut qubits: Option<usize> = None;
    let mut entries: Vec<Complex64> = Vec::new();
    let mut expected = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if let Some(meta) = line.strip_prefix("#@") {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, line_no, "metadata line needs `key = value`"))?;
            metadata.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match qubits {
            None => {
                let (Some("qubits"), Some(n), None) = (fields.next(), fields.next(), fields.next()) else {
                    return Err(Error::parse(source_name, line_no, "expected header `qubits <N>`"));
                };
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::parse(source_name, line_no, format!("bad qubit count {n:?}")))?;
                if n == 0 || n > MAX_QUBITS {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("qubit count must be in 1..={MAX_QUBITS}, got {n}"),
                    ));
                }
                qubits = Some(n);
                expected = 1usize << (2 * n);
                entries.reserve(expected);
            }
            Some(_) => {
                let (Some(re), Some(im), None) = (fields.next(), fields.next(), fields.next()) else {
                    return Err(Error::parse(source_name, line_no, "expected `re im`"));
                };
                if entries.len() == expected {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("more than the {expected} declared entries"),
                    ));
                }
                let parse = |s: &str| -> Result<f64> {
                    s.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(source_name, line_no, format!("bad number {s:?}")))
                };
                entries.push(Complex64::new(parse(re)?, parse(im)?));
            }
        }
    }
    let Some(n) = qubits else {
        return Err(Error::parse(source_name, 0, "missing `qubits <N>` header"));
    };
    if entries.len() != expected {
        return Err(Error::parse(
            source_name,
            0,
            format!("declared {n} qubits ({expected} entries), found {}", entries.len()),
        ));
    }
    let raw = DensityMatrix::unchecked(n, entries)?;
    let matrix = physical(raw, opts, &mut metadata)?;
    Ok(DensityMatrixFile { matrix, metadata })
}

/// Validates an ingested matrix, symmetrizing round-off and optionally
/// clipping slightly negative eigenvalues. Adjustments are recorded in
/// `metadata`.
fn physical(raw: DensityMatrix, opts: &ReadOptions, metadata: &mut BTreeMap<String, String>) -> Result<DensityMatrix> {
    let herm = raw.max_hermitian_deviation();
    if herm > INGEST_HERMITIAN_TOL {
        return Err(Error::Unphysical(format!(
            "not Hermitian: deviation {herm:.3e} exceeds {INGEST_HERMITIAN_TOL:.0e}"
        )));
    }
    let tr = raw.trace();
    if (tr.re - 1.0).abs() > INGEST_TRACE_TOL || tr.im.abs() > INGEST_TRACE_TOL {
        return Err(Error::Unphysical(format!("trace {tr} differs from 1 by more than {INGEST_TRACE_TOL:.0e}")));
    }
    let n = raw.qubits();
    let d = raw.dim();
    let mut entries = raw.entries().to_vec();
    if herm > 0.0 {
        for i in 0..d {
            for j in i..d {
                let avg = (entries[i * d + j] + entries[j * d + i].conj()) * 0.5;
                entries[i * d + j] = avg;
                entries[j * d + i] = avg.conj();
            }
        }
        metadata.insert("adjusted.hermitian".into(), format!("{herm:.3e}"));
    }
    if (tr.re - 1.0).abs() > 1e-14 {
        let s = 1.0 / tr.re;
        entries.iter_mut().for_each(|e| *e *= s);
        metadata.insert("adjusted.trace".into(), format!("{:.17e}", tr.re));
    }
    let rho = DensityMatrix::unchecked(n, entries)?;
    let min = rho.eigenvalues()[0];
    if min >= -crate::quantum::density::NEGATIVITY_TOL {
        rho.validate()?;
        return Ok(rho);
    }
    if min < REPAIR_THRESHOLD {
        return Err(Error::Unphysical(format!(
            "negativity exceeds repair threshold: smallest eigenvalue {min:.3e} < {REPAIR_THRESHOLD:.0e}"
        )));
    }
    if !opts.repair {
        return Err(Error::Unphysical(format!(
            "smallest eigenvalue {min:.3e} is negative and repair is disabled"
        )));
    }
    let repaired = clip_negative_eigenvalues(&rho)?;
    log::warn!("clipped negative eigenvalue {min:.3e} of ingested density matrix");
    metadata.insert("repair.min_eigenvalue".into(), format!("{min:.17e}"));
    Ok(repaired)
}

/// Sets negative eigenvalues to zero and renormalizes to unit trace.
pub fn clip_negative_eigenvalues(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let eig = rho.to_nalgebra().symmetric_eigen();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::Unphysical("no positive spectrum left after clipping".into()));
    }
    let d = rho.dim();
    let v = &eig.eigenvectors;
    let lambda = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(clipped[i] / total, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let m = v * lambda * v.adjoint();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            entries.push(m[(i, j)]);
        }
    }
    // Exact Hermiticity after the floating-point product.
    for i in 0..d {
        entries[i * d + i].im = 0.0;
        for j in i + 1..d {
            let avg = (entries[i * d + j] + entries[j * d + i].conj()) * 0.5;
            entries[i * d + j] = avg;
            entries[j * d + i] = avg.conj();
        }
    }
    DensityMatrix::new(rho.qubits(), entries)
}

pub fn read_density_matrix(path: &Path, opts: &ReadOptions) -> Result<DensityMatrixFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_density_matrix(&text, &path.display().to_string(), opts)
}

/// Serializes with 17 significant digits per component.
pub fn format_density_matrix(rho: &DensityMatrix, metadata: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(rho.entries().len() * 50);
    out.push_str(&format!("qubits {}\n", rho.qubits()));
    for (k, v) in metadata {
        out.push_str(&format!("#@ {k} = {v}\n"));
    }
    for e in rho.entries() {
        out.push_str(&format!("{:.16e} {:.16e}\n", e.re, e.im));
    }
    out
}

pub fn write_density_matrix(path: &Path, rho: &DensityMatrix, metadata: &BTreeMap<String, String>) -> Result<()> {
    super::results::write_atomic(path, format_density_matrix(rho, metadata).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{make_state, StateSpec};

    fn parse(text: &str, repair: bool) -> Result<DensityMatrixFile> {
        parse_density_matrix(text, "test", &ReadOptions { repair })
    }

    fn diag_file(values: &[f64]) -> String {
        let d = values.len();
        let n = d.trailing_zeros();
        let mut s = format!("qubits {n}\n");
        for i in 0..d {
            for j in 0..d {
                let v = if i == j { values[i] } else { 0.0 };
                s.push_str(&format!("{v} 0\n"));
            }
        }
        s
    }

    #[test]
    fn identity_accepted_unchanged() {
        let f = parse(&diag_file(&[0.25; 4]), false).unwrap();
        assert_eq!(f.matrix, DensityMatrix::maximally_mixed(2).unwrap());
        assert!(f.metadata.is_empty());
    }

    #[test]
    fn ghz_round_trip() {
        let rho = make_state(&StateSpec::Ghz { qubits: 2, alpha: std::f64::consts::FRAC_PI_4 }).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("origin".to_string(), "catalog".to_string());
        let text = format_density_matrix(&rho, &meta);
        let back = parse(&text, false).unwrap();
        assert_eq!(back.metadata, meta);
        for (a, b) in back.matrix.entries().iter().zip(rho.entries()) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn strong_negativity_rejected() {
        // diag(0.5 + 1e-3, 0.5 - ..., -1e-3) on two qubits.
        let text = diag_file(&[0.501, 0.25, 0.25, -0.001]);
        let err = parse(&text, true).unwrap_err();
        assert!(err.to_string().contains("negativity exceeds repair threshold"), "{err}");
    }

    #[test]
    fn mild_negativity_repaired_when_enabled() {
        let text = diag_file(&[0.5000001, 0.25, 0.25, -1e-7]);
        assert!(parse(&text, false).is_err());
        let f = parse(&text, true).unwrap();
        assert!(f.metadata.contains_key("repair.min_eigenvalue"));
        assert!(f.matrix.eigenvalues()[0] >= 0.0);
        assert!((f.matrix.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermiticity_and_trace_gates() {
        let mut text = diag_file(&[0.5, 0.5]);
        text = text.replacen("0 0\n", "0.001 0\n", 1);
        assert!(matches!(parse(&text, false), Err(Error::Unphysical(_))));
        assert!(matches!(parse(&diag_file(&[0.5, 0.6]), false), Err(Error::Unphysical(_))));
        // Within the ingest tolerance the trace is renormalized.
        let f = parse(&diag_file(&[0.5, 0.5000001]), false).unwrap();
        assert!(f.metadata.contains_key("adjusted.trace"));
        assert!((f.matrix.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structural_errors_name_lines() {
        assert!(parse("", false).is_err());
        assert!(parse("qubit 1\n", false).is_err());
        let err = parse("qubits 1\n1 0\n0 0\n0 0\n", false).unwrap_err();
        assert!(err.to_string().contains("found 3"), "{err}");
        let err = parse("qubits 1\n1 0\n0 0\n0 x\n0 0\n", false).unwrap_err();
        assert!(err.to_string().contains("test:4"), "{err}");
        assert!(parse("qubits 1\n1 0\n0 0\n0 0\n0 0\n0 0\n", false).is_err());
        assert!(parse("qubits 99\n", false).is_err());
        assert!(parse("qubits 1\n1 0\n0 0\n0 0\n0 NaN\n", false).is_err());
    }
}
