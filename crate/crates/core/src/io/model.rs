//! Sparse text format for local hidden variable models:
//!
//! ```text
//! atoms 16
//! visibility 0.70710678118654757
//! 1 0.125
//! 3 0.125
//! ```
//!
//! Unlisted atoms have zero weight. The `visibility` line is optional.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest atom count accepted from a file (`2^24`).
const MAX_ATOMS: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub atoms: Vec<f64>,
    pub visibility: Option<f64>,
}

pub fn parse_model(text: &str, source_name: &str) -> Result<ModelFile> {
    let mut atoms: Option<Vec<f64>> = None;
    let mut seen: Vec<bool> = Vec::new();
    let mut visibility = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::parse(source_name, line_no, msg);
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("bad number {s:?}")))
        };
        let Some(a) = atoms.as_mut() else {
            let ["atoms", n] = fields[..] else {
                return Err(err("expected header `atoms <n>`".into()));
            };
            let n: usize = n.parse().map_err(|_| err(format!("bad atom count {n:?}")))?;
            if n == 0 || n > MAX_ATOMS || !n.is_power_of_two() {
                return Err(err(format!("atom count must be a power of two up to {MAX_ATOMS}, got {n}")));
            }
            atoms = Some(vec![0.0; n]);
            seen = vec![false; n];
            continue;
        };
        match fields[..] {
            ["visibility", v] => {
                if visibility.replace(number(v)?).is_some() {
                    return Err(err("visibility given twice".into()));
                }
            }
            [index, value] => {
                let k: usize = index.parse().map_err(|_| err(format!("bad atom index {index:?}")))?;
                if k >= a.len() {
                    return Err(err(format!("atom index {k} out of range 0..{}", a.len())));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(err(format!("atom {k} given twice")));
                }
                a[k] = number(value)?;
            }
            _ => return Err(err("expected `index value`".into())),
        }
    }
    let atoms = atoms.ok_or_else(|| Error::parse(source_name, 0, "missing `atoms <n>` header"))?;
    Ok(ModelFile { atoms, visibility })
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_model(&text, &path.display().to_string())
}

/// Writes the nonzero atoms at full precision.
pub fn format_model(atoms: &[f64], visibility: Option<f64>) -> String {
    let mut out = format!("atoms {}\n", atoms.len());
    if let Some(v) = visibility {
        let _ = writeln!(out, "visibility {v:.16e}");
    }
    for (k, p) in atoms.iter().enumerate().filter(|(_, p)| **p != 0.0) {
        let _ = writeln!(out, "{k} {p:.16e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut atoms = vec![0.0; 16];
        atoms[3] = 0.125;
        atoms[7] = 1.0 / 3.0;
        let text = format_model(&atoms, Some(std::f64::consts::FRAC_1_SQRT_2));
        let m = parse_model(&text, "m").unwrap();
        assert_eq!(m.atoms, atoms);
        assert_eq!(m.visibility, Some(std::f64::consts::FRAC_1_SQRT_2));
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "1 0.5\n",
            "atoms 3\n",
            "atoms 4\n4 0.1\n",
            "atoms 4\n1 0.1\n1 0.1\n",
            "atoms 4\n1 inf\n",
            "atoms 4\nvisibility 1\nvisibility 1\n",
            "atoms 4\n1 2 3\n",
        ] {
            assert!(parse_model(bad, "m").is_err(), "{bad:?}");
        }
        let err = parse_model("atoms 4\n\n9 1\n", "m").unwrap_err();
        assert!(err.to_string().starts_with("m:3:"), "{err}");
    }
}
