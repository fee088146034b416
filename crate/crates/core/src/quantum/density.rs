use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const NEGATIVITY_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive-semidefinite operator on `N` qubits.
///
/// Entries are stored row-major; basis index bits put qubit 1 (observer 1)
/// most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// Validates every invariant.
    pub fn new(qubits: usize, entries: Vec<Complex64>) -> Result<Self> {
        let rho = DensityMatrix::unchecked(qubits, entries)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Only checks the shape.
    pub(crate) fn unchecked(qubits: usize, entries: Vec<Complex64>) -> Result<Self> {
        if qubits == 0 || qubits > 15 {
            return Err(Error::InvalidState(format!("unsupported qubit count {qubits}")));
        }
        let dim = 1usize << qubits;
        if entries.len() != dim * dim {
            return Err(Error::InvalidState(format!(
                "{qubits} qubits need {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(DensityMatrix { qubits, entries })
    }

    pub fn from_pure(qubits: usize, amplitudes: &[Complex64]) -> Result<Self> {
        let dim = 1usize << qubits;
        if amplitudes.len() != dim {
            return Err(Error::InvalidState(format!(
                "{qubits} qubits need {dim} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let mut entries = Vec::with_capacity(dim * dim);
        for a in &psi {
            for b in &psi {
                entries.push(a * b.conj());
            }
        }
        DensityMatrix::new(qubits, entries)
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        DensityMatrix::new(qubits, entries)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim() + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.entries[i * d + i]).sum()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // rho is Hermitian, so Tr(rho^2) = sum |rho_ij|^2.
        self.entries.iter().map(|e| e.norm_sqr()).sum()
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let dev = (self.entries[i * d + j] - self.entries[j * d + i].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.entries)
    }

    /// Eigenvalues in ascending order (of the Hermitian part).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_nalgebra();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.max_hermitian_deviation();
        if herm > HERMITIAN_TOL {
            return Err(Error::Unphysical(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Unphysical(format!("trace is {tr}, expected 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -NEGATIVITY_TOL {
            return Err(Error::Unphysical(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// `v rho + (1 - v) 1 / 2^N`.
    pub fn mix_white_noise(&self, v: f64) -> Result<Self> {
        check_visibility(v)?;
        let d = self.dim();
        let noise = (1.0 - v) / d as f64;
        let mut entries: Vec<Complex64> = self.entries.iter().map(|e| e * v).collect();
        for i in 0..d {
            entries[i * d + i] += noise;
        }
        Ok(DensityMatrix {
            qubits: self.qubits,
            entries,
        })
    }

    /// Tensor product `self (x) other`, `self` on the leading qubits.
    pub fn kron(&self, other: &DensityMatrix) -> Result<Self> {
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.entries[i * da + j];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        entries[(i * db + k) * d + j * db + l] = a * other.entries[k * db + l];
                    }
                }
            }
        }
        DensityMatrix::unchecked(self.qubits + other.qubits, entries)
    }

    /// Reorders qubits so that new qubit `i` is old qubit `perm[i]`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<Self> {
        let n = self.qubits;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Config(format!("{perm:?} is not a permutation of {n} qubits")));
        }
        let d = self.dim();
        let map = |new: usize| -> usize {
            let mut old = 0;
            for (i, &p) in perm.iter().enumerate() {
                let bit = (new >> (n - 1 - i)) & 1;
                old |= bit << (n - 1 - p);
            }
            old
        };
        let index: Vec<usize> = (0..d).map(map).collect();
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = self.entries[index[i] * d + index[j]];
            }
        }
        DensityMatrix::unchecked(n, entries)
    }
}

pub(crate) fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Visibility(v))
    }
}

/// `v rho + (1 - v) 1 / 2^N`.
pub fn mix_white_noise(rho: &DensityMatrix, v: f64) -> Result<DensityMatrix> {
    rho.mix_white_noise(v)
}
