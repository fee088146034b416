use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;

use super::DensityMatrix;
use crate::error::{Error, Result};
use crate::io::density_file::{read_density_matrix, ReadOptions};

/// Catalog of states with their parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    /// `cos(alpha)|0...0> + sin(alpha)|1...1>`.
    Ghz { qubits: usize, alpha: f64 },
    W { qubits: usize },
    /// Four-qubit singlet.
    Psi4,
    /// Six-qubit singlet.
    Psi6,
    /// Symmetric state with `k` excitations, `C(N, k)^{-1/2}` normalization.
    Dicke { qubits: usize, k: usize },
    /// Linear cluster state, 4 or 5 qubits.
    Cluster { qubits: usize },
    /// Three-qubit bound entangled state built from an unextendible product basis.
    Bennett,
    Dur { qubits: usize, phase: f64 },
    Smolin { qubits: usize },
    /// `1 / 2^N`.
    Mixed { qubits: usize },
    /// Two-qubit singlet followed by `idle` maximally mixed qubits.
    Singlet { idle: usize },
    /// Density matrix read from a file.
    External { path: PathBuf, repair: bool },
}

/// Optional parameters accompanying a family name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateParams {
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub phase: Option<f64>,
    pub file: Option<PathBuf>,
    pub repair: bool,
}

pub const FAMILIES: &[(&str, &str)] = &[
    ("ghz", "cos(alpha)|0..0> + sin(alpha)|1..1>; --alpha (default pi/4)"),
    ("w", "W state, N >= 2"),
    ("psi4", "four-qubit singlet, N = 4"),
    ("psi6", "six-qubit singlet, N = 6"),
    ("dicke", "symmetric Dicke state; --k excitations (default N/2)"),
    ("cluster", "linear cluster state, N = 4 or 5"),
    ("bennett", "three-qubit UPB bound entangled state, N = 3"),
    ("dur", "N-qubit Dur bound entangled state; --phase (default 0)"),
    ("smolin", "generalized Smolin state, even N"),
    ("mixed", "maximally mixed state"),
    ("singlet", "two-qubit singlet (x) maximally mixed qubits, N >= 2"),
    ("file", "density matrix file; --file PATH, optional --repair"),
];

impl StateSpec {
    pub fn from_parts(family: &str, qubits: Option<usize>, params: &StateParams) -> Result<Self> {
        let family = family.trim().to_ascii_lowercase();
        let need_qubits = || {
            qubits.ok_or_else(|| Error::InvalidState(format!("state {family} needs a qubit count")))
        };
        let reject = |name: &str, present: bool| {
            if present {
                Err(Error::InvalidState(format!("state {family} takes no {name} parameter")))
            } else {
                Ok(())
            }
        };
        reject("alpha", params.alpha.is_some() && family != "ghz")?;
        reject("k", params.k.is_some() && family != "dicke")?;
        reject("phase", params.phase.is_some() && family != "dur")?;
        reject("file", params.file.is_some() && family != "file")?;
        reject("repair", params.repair && family != "file")?;

        let spec = match family.as_str() {
            "ghz" => StateSpec::Ghz {
                qubits: need_qubits()?,
                alpha: params.alpha.unwrap_or(std::f64::consts::FRAC_PI_4),
            },
            "w" => StateSpec::W { qubits: need_qubits()? },
            "psi4" => fixed_qubits(&family, qubits, 4, StateSpec::Psi4)?,
            "psi6" => fixed_qubits(&family, qubits, 6, StateSpec::Psi6)?,
            "bennett" => fixed_qubits(&family, qubits, 3, StateSpec::Bennett)?,
            "dicke" => {
                let q = need_qubits()?;
                StateSpec::Dicke { qubits: q, k: params.k.unwrap_or(q / 2) }
            }
            "cluster" => StateSpec::Cluster { qubits: need_qubits()? },
            "dur" => StateSpec::Dur {
                qubits: need_qubits()?,
                phase: params.phase.unwrap_or(0.0),
            },
            "smolin" => StateSpec::Smolin { qubits: need_qubits()? },
            "mixed" => StateSpec::Mixed { qubits: need_qubits()? },
            "singlet" => {
                let q = qubits.unwrap_or(2);
                if q < 2 {
                    return Err(Error::InvalidState("singlet needs at least 2 qubits".into()));
                }
                StateSpec::Singlet { idle: q - 2 }
            }
            "file" => StateSpec::External {
                path: params
                    .file
                    .clone()
                    .ok_or_else(|| Error::InvalidState("state file needs a path".into()))?,
                repair: params.repair,
            },
            other => return Err(Error::InvalidState(format!("unknown state family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidState(msg));
        match *self {
            StateSpec::Ghz { qubits, alpha } => {
                at_least(qubits, 2)?;
                if !alpha.is_finite() {
                    return bad(format!("alpha must be finite, got {alpha}"));
                }
            }
            StateSpec::W { qubits } | StateSpec::Mixed { qubits } => at_least(qubits, 2)?,
            StateSpec::Dicke { qubits, k } => {
                at_least(qubits, 2)?;
                if k > qubits {
                    return bad(format!("Dicke excitation k = {k} exceeds N = {qubits}"));
                }
            }
            StateSpec::Cluster { qubits } => {
                if qubits != 4 && qubits != 5 {
                    return bad(format!("cluster state defined for 4 or 5 qubits, got {qubits}"));
                }
            }
            StateSpec::Dur { qubits, phase } => {
                at_least(qubits, 2)?;
                if !phase.is_finite() {
                    return bad(format!("Dur phase must be finite, got {phase}"));
                }
            }
            StateSpec::Smolin { qubits } => {
                at_least(qubits, 2)?;
                if qubits % 2 != 0 {
                    return bad(format!("Smolin state requires even N, got {qubits}"));
                }
            }
            StateSpec::Singlet { idle } => at_least(idle + 2, 2)?,
            StateSpec::Psi4 | StateSpec::Psi6 | StateSpec::Bennett | StateSpec::External { .. } => {}
        }
        Ok(())
    }

    /// Qubit count, when known without reading a file.
    pub fn qubits(&self) -> Option<usize> {
        match *self {
            StateSpec::Ghz { qubits, .. }
            | StateSpec::W { qubits }
            | StateSpec::Dicke { qubits, .. }
            | StateSpec::Cluster { qubits }
            | StateSpec::Dur { qubits, .. }
            | StateSpec::Smolin { qubits }
            | StateSpec::Mixed { qubits } => Some(qubits),
            StateSpec::Psi4 => Some(4),
            StateSpec::Psi6 => Some(6),
            StateSpec::Bennett => Some(3),
            StateSpec::Singlet { idle } => Some(idle + 2),
            StateSpec::External { .. } => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            StateSpec::Ghz { .. } => "ghz",
            StateSpec::W { .. } => "w",
            StateSpec::Psi4 => "psi4",
            StateSpec::Psi6 => "psi6",
            StateSpec::Dicke { .. } => "dicke",
            StateSpec::Cluster { .. } => "cluster",
            StateSpec::Bennett => "bennett",
            StateSpec::Dur { .. } => "dur",
            StateSpec::Smolin { .. } => "smolin",
            StateSpec::Mixed { .. } => "mixed",
            StateSpec::Singlet { .. } => "singlet",
            StateSpec::External { .. } => "file",
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Ghz { qubits, alpha } => write!(f, "GHZ({alpha:.6})_{qubits}"),
            StateSpec::W { qubits } => write!(f, "W_{qubits}"),
            StateSpec::Psi4 => f.write_str("Psi_4"),
            StateSpec::Psi6 => f.write_str("Psi_6"),
            StateSpec::Dicke { qubits, k } => write!(f, "D_{qubits}^({k})"),
            StateSpec::Cluster { qubits } => write!(f, "Cluster_{qubits}"),
            StateSpec::Bennett => f.write_str("Bennett_3"),
            StateSpec::Dur { qubits, phase } => write!(f, "Dur_{qubits}(phase={phase:.6})"),
            StateSpec::Smolin { qubits } => write!(f, "Smolin_{qubits}"),
            StateSpec::Mixed { qubits } => write!(f, "Mixed_{qubits}"),
            StateSpec::Singlet { idle } => write!(f, "Singlet(x)noise^{idle}"),
            StateSpec::External { path, .. } => write!(f, "file:{}", path.display()),
        }
    }
}

fn at_least(qubits: usize, min: usize) -> Result<()> {
    if qubits < min {
        Err(Error::InvalidState(format!("need at least {min} qubits, got {qubits}")))
    } else if qubits > 12 {
        Err(Error::InvalidState(format!("{qubits} qubits is beyond the supported range")))
    } else {
        Ok(())
    }
}

fn fixed_qubits(family: &str, given: Option<usize>, n: usize, spec: StateSpec) -> Result<StateSpec> {
    match given {
        Some(q) if q != n => Err(Error::InvalidState(format!("{family} is a {n}-qubit state, got N = {q}"))),
        _ => Ok(spec),
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Amplitude vector from `(basis index, amplitude)` pairs.
fn ket(qubits: usize, terms: &[(usize, Complex64)]) -> Vec<Complex64> {
    let mut psi = vec![real(0.0); 1 << qubits];
    for &(i, a) in terms {
        psi[i] += a;
    }
    psi
}

fn bits(s: &str) -> usize {
    usize::from_str_radix(s, 2).expect("basis label")
}

fn w_terms(qubits: usize, flipped: bool) -> Vec<usize> {
    let all = (1usize << qubits) - 1;
    (0..qubits)
        .map(|i| {
            let one_hot = 1usize << (qubits - 1 - i);
            if flipped {
                all ^ one_hot
            } else {
                one_hot
            }
        })
        .collect()
}

fn dicke_amplitudes(qubits: usize, k: usize) -> Vec<Complex64> {
    let members: Vec<usize> = (0..1usize << qubits)
        .filter(|i| i.count_ones() as usize == k)
        .collect();
    let amp = 1.0 / (members.len() as f64).sqrt();
    ket(qubits, &members.iter().map(|&i| (i, real(amp))).collect::<Vec<_>>())
}

/// Pauli `sigma^{(x)N}` as `(column, value)` for each row.
fn pauli_tensor(qubits: usize, which: usize) -> impl Fn(usize) -> (usize, Complex64) {
    let all = (1usize << qubits) - 1;
    move |row| {
        let ones = row.count_ones() as i32;
        let zeros = qubits as i32 - ones;
        match which {
            // sigma_x
            0 => (row ^ all, real(1.0)),
            // sigma_y: <0|Y|1> = -i, <1|Y|0> = i
            1 => {
                let phase = Complex64::new(0.0, -1.0).powi(zeros) * Complex64::new(0.0, 1.0).powi(ones);
                (row ^ all, phase)
            }
            // sigma_z
            _ => (row, real(if ones % 2 == 0 { 1.0 } else { -1.0 })),
        }
    }
}

/// Density matrix of a catalog state.
pub fn make_state(spec: &StateSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    match *spec {
        StateSpec::Ghz { qubits, alpha } => {
            let all = (1usize << qubits) - 1;
            let psi = ket(qubits, &[(0, real(alpha.cos())), (all, real(alpha.sin()))]);
            DensityMatrix::from_pure(qubits, &psi)
        }
        StateSpec::W { qubits } => dicke_pure(qubits, 1),
        StateSpec::Dicke { qubits, k } => dicke_pure(qubits, k),
        StateSpec::Psi4 => {
            let a = 1.0 / 3f64.sqrt();
            let b = -1.0 / 12f64.sqrt();
            let psi = ket(
                4,
                &[
                    (bits("0011"), real(a)),
                    (bits("1100"), real(a)),
                    (bits("0101"), real(b)),
                    (bits("0110"), real(b)),
                    (bits("1001"), real(b)),
                    (bits("1010"), real(b)),
                ],
            );
            DensityMatrix::from_pure(4, &psi)
        }
        StateSpec::Psi6 => {
            let mut terms = vec![(bits("000111"), real(0.5)), (bits("111000"), real(-0.5))];
            let w = 1.0 / 3f64.sqrt();
            // (1/2)(|Wbar>|W> - |W>|Wbar>)
            for &hi in &w_terms(3, true) {
                for &lo in &w_terms(3, false) {
                    terms.push(((hi << 3) | lo, real(0.5 * w * w)));
                }
            }
            for &hi in &w_terms(3, false) {
                for &lo in &w_terms(3, true) {
                    terms.push(((hi << 3) | lo, real(-0.5 * w * w)));
                }
            }
            DensityMatrix::from_pure(6, &ket(6, &terms))
        }
        StateSpec::Cluster { qubits: 4 } => {
            let psi = ket(
                4,
                &[
                    (bits("0000"), real(0.5)),
                    (bits("0011"), real(0.5)),
                    (bits("1100"), real(0.5)),
                    (bits("1111"), real(-0.5)),
                ],
            );
            DensityMatrix::from_pure(4, &psi)
        }
        StateSpec::Cluster { qubits } => {
            // Graph state of the linear chain: CZ between neighbours on |+>^N.
            let amp = 1.0 / ((1usize << qubits) as f64).sqrt();
            let psi: Vec<Complex64> = (0..1usize << qubits)
                .map(|i| {
                    let links = (i & (i >> 1)).count_ones();
                    real(if links % 2 == 0 { amp } else { -amp })
                })
                .collect();
            DensityMatrix::from_pure(qubits, &psi)
        }
        StateSpec::Bennett => bennett(),
        StateSpec::Dur { qubits, phase } => dur(qubits, phase),
        StateSpec::Smolin { qubits } => smolin(qubits),
        StateSpec::Mixed { qubits } => DensityMatrix::maximally_mixed(qubits),
        StateSpec::Singlet { idle } => {
            let s = FRAC_1_SQRT_2;
            let singlet = DensityMatrix::from_pure(2, &ket(2, &[(1, real(s)), (2, real(-s))]))?;
            if idle == 0 {
                return Ok(singlet);
            }
            let noise = DensityMatrix::maximally_mixed(idle)?;
            let rho = singlet.kron(&noise)?;
            rho.validate()?;
            Ok(rho)
        }
        StateSpec::External { ref path, repair } => {
            let opts = ReadOptions { repair };
            Ok(read_density_matrix(path, &opts)?.matrix)
        }
    }
}

fn dicke_pure(qubits: usize, k: usize) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(qubits, &dicke_amplitudes(qubits, k))
}

fn outer_add(entries: &mut [Complex64], psi: &[Complex64], weight: f64) {
    let d = psi.len();
    for i in 0..d {
        if psi[i] == real(0.0) {
            continue;
        }
        for j in 0..d {
            entries[i * d + j] += psi[i] * psi[j].conj() * weight;
        }
    }
}

fn product_ket(factors: &[[f64; 2]]) -> Vec<Complex64> {
    let mut psi = vec![real(1.0)];
    for f in factors {
        psi = psi.iter().flat_map(|a| [a * f[0], a * f[1]]).collect();
    }
    psi
}

fn bennett() -> Result<DensityMatrix> {
    let zero = [1.0, 0.0];
    let one = [0.0, 1.0];
    let plus = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
    let minus = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];
    let upb = [
        product_ket(&[zero, one, plus]),
        product_ket(&[one, plus, zero]),
        product_ket(&[plus, zero, one]),
        product_ket(&[minus, minus, minus]),
    ];
    let d = 8;
    let mut entries = vec![real(0.0); d * d];
    for i in 0..d {
        entries[i * d + i] = real(0.25);
    }
    for psi in &upb {
        outer_add(&mut entries, psi, -0.25);
    }
    DensityMatrix::new(3, entries)
}

fn dur(qubits: usize, phase: f64) -> Result<DensityMatrix> {
    let d = 1usize << qubits;
    let all = d - 1;
    let s = FRAC_1_SQRT_2;
    let phi = ket(qubits, &[(0, real(s)), (all, Complex64::from_polar(s, phase))]);
    let mut entries = vec![real(0.0); d * d];
    outer_add(&mut entries, &phi, 1.0);
    for k in 0..qubits {
        let one_hot = 1usize << (qubits - 1 - k);
        for idx in [one_hot, all ^ one_hot] {
            entries[idx * d + idx] += 0.5;
        }
    }
    let norm = 1.0 / (qubits as f64 + 1.0);
    let entries = entries.into_iter().map(|e| e * norm).collect();
    DensityMatrix::new(qubits, entries)
}

fn smolin(qubits: usize) -> Result<DensityMatrix> {
    let d = 1usize << qubits;
    let sign = if (qubits / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let mut entries = vec![real(0.0); d * d];
    for i in 0..d {
        entries[i * d + i] += 1.0;
    }
    for which in 0..3 {
        let pauli = pauli_tensor(qubits, which);
        for row in 0..d {
            let (col, val) = pauli(row);
            entries[row * d + col] += val * sign;
        }
    }
    let scale = 1.0 / d as f64;
    DensityMatrix::new(qubits, entries.into_iter().map(|e| e * scale).collect())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_4;

    use super::*;

    fn spec(family: &str, qubits: usize) -> StateSpec {
        StateSpec::from_parts(family, Some(qubits), &StateParams::default()).unwrap()
    }

    #[test]
    fn ghz_amplitudes() {
        let rho = make_state(&StateSpec::Ghz { qubits: 2, alpha: FRAC_PI_4 }).unwrap();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((rho.entry(i, j).re - 0.5).abs() < 1e-15);
        }
        assert!(rho.entry(1, 1).norm() < 1e-15);

        let product = make_state(&StateSpec::Ghz { qubits: 3, alpha: 0.0 }).unwrap();
        assert_eq!(product.entry(0, 0), real(1.0));
        assert!((product.purity() - 1.0).abs() < 1e-12);
        assert!(product.entries()[1..].iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn w3_diagonal() {
        let rho = make_state(&spec("w", 3)).unwrap();
        for i in 0..8 {
            let expected = if [1, 2, 4].contains(&i) { 1.0 / 3.0 } else { 0.0 };
            assert!((rho.entry(i, i).re - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn smolin4_spectrum() {
        // Three commuting Pauli strings with product identity: the joint
        // eigenspaces have dimension 4 and the formula gives 1/4 on one of them.
        let vals = make_state(&spec("smolin", 4)).unwrap().eigenvalues();
        for (i, v) in vals.iter().enumerate() {
            let expected = if i >= 12 { 0.25 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "eigenvalue {i} = {v}");
        }
    }

    #[test]
    fn smolin_rejects_odd() {
        let err = StateSpec::from_parts("smolin", Some(5), &StateParams::default()).unwrap_err();
        assert!(err.to_string().contains("even"));
    }

    #[test]
    fn dicke_bounds() {
        let p = StateParams { k: Some(5), ..Default::default() };
        assert!(StateSpec::from_parts("dicke", Some(4), &p).is_err());
        assert_eq!(spec("dicke", 4), StateSpec::Dicke { qubits: 4, k: 2 });
        let rho = make_state(&StateSpec::Dicke { qubits: 4, k: 0 }).unwrap();
        assert_eq!(rho.entry(0, 0), real(1.0));
    }

    #[test]
    fn catalog_is_physical() {
        let catalog = [
            spec("ghz", 5),
            spec("w", 4),
            spec("psi4", 4),
            spec("psi6", 6),
            spec("dicke", 6),
            spec("cluster", 4),
            spec("cluster", 5),
            spec("bennett", 3),
            spec("dur", 4),
            StateSpec::Dur { qubits: 5, phase: 0.7 },
            spec("smolin", 6),
            spec("singlet", 3),
            spec("mixed", 3),
        ];
        for s in &catalog {
            let rho = make_state(s).unwrap_or_else(|e| panic!("{s}: {e}"));
            rho.validate().unwrap();
            assert_eq!(Some(rho.qubits()), s.qubits());
            let pure = !matches!(
                s,
                StateSpec::Bennett
                    | StateSpec::Dur { .. }
                    | StateSpec::Smolin { .. }
                    | StateSpec::Mixed { .. }
                    | StateSpec::Singlet { idle: 1.. }
            );
            if pure {
                assert!((rho.purity() - 1.0).abs() < 1e-10, "{s}");
            }
        }
    }

    #[test]
    fn bennett_is_rank_four_projector_over_four() {
        let vals = make_state(&StateSpec::Bennett).unwrap().eigenvalues();
        let zeros = vals.iter().filter(|v| v.abs() < 1e-12).count();
        assert_eq!(zeros, 4);
        assert!(vals.iter().filter(|v| (*v - 0.25).abs() < 1e-12).count() == 4);
    }

    #[test]
    fn family_parameter_mismatch_rejected() {
        let p = StateParams { alpha: Some(0.1), ..Default::default() };
        assert!(StateSpec::from_parts("w", Some(3), &p).is_err());
        assert!(StateSpec::from_parts("psi4", Some(5), &StateParams::default()).is_err());
        assert!(StateSpec::from_parts("cluster", Some(6), &StateParams::default()).is_err());
        assert!(StateSpec::from_parts("nope", Some(2), &StateParams::default()).is_err());
        assert!(StateSpec::from_parts("file", None, &StateParams::default()).is_err());
    }
}
