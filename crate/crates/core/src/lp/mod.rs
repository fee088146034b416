//! The local-realism linear program and its certificates.
//!
//! A local hidden variable model for `N` observers with `m_i` settings is a
//! probability distribution over the `2^(sum m_i)` joint outcome assignments
//! ("atoms"). Its marginals must reproduce the noisy quantum probabilities
//! `v P + (1 - v) / 2^N` for every setting combination; the largest such `v`
//! is the critical visibility for the chosen observables.

pub mod problem;
pub mod simplex;

pub use problem::{atom_outcome, build_lp, AtomIndex, LpProblem, RowForm};
pub use simplex::{Basis, SimplexOptions, SimplexStats};

use crate::error::{Error, Result};
use crate::quantum::{probability_tensor, AngleConfiguration, DensityMatrix, ProbabilityTensor, Scenario};

/// Tolerance every returned model must meet on the marginal equalities.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// No-signaling deviation below which the all-plus row form is used.
const SIGNALING_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    InfeasibleNumerics,
}

/// Maximal visibility and a joint distribution attaining it.
#[derive(Clone, Debug)]
pub struct LhvSolution {
    pub visibility: f64,
    pub atoms: Vec<f64>,
    pub status: SolveStatus,
    /// Largest marginal-equality residual of `atoms` at `visibility`.
    pub residual: f64,
    pub stats: SimplexStats,
    pub form: RowForm,
    /// Failure description when `status` is not optimal.
    pub diagnostics: Option<String>,
    /// Optimal basis, usable to warm-start a program of the same shape.
    pub basis: Option<Basis>,
}

impl LhvSolution {
    pub fn is_certified(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Atoms with nonzero weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.atoms.iter().copied().enumerate().filter(|(_, p)| *p != 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub max_residual: f64,
    pub normalization_error: f64,
    /// Largest amount by which an atom leaves `[0, 1]`.
    pub bound_violation: f64,
    pub pass: bool,
}

impl VerificationReport {
    /// Largest of the three error measures.
    pub fn worst(&self) -> f64 {
        self.max_residual.max(self.normalization_error).max(self.bound_violation)
    }
}

/// Checks that `atoms` form a local model of `p` mixed with white noise at
/// visibility `v`: bounds, normalization and every marginal equality.
pub fn verify_lhv_model(atoms: &[f64], v: f64, p: &ProbabilityTensor, tolerance: f64) -> Result<VerificationReport> {
    let sc = p.scenario();
    if atoms.len() != sc.atom_count() {
        return Err(Error::Config(format!(
            "model has {} atoms, scenario {sc} needs {}",
            atoms.len(),
            sc.atom_count()
        )));
    }
    let t = sc.outcome_tuples();
    let u = 1.0 / t as f64;
    let bits = problem::combination_bits(sc);
    let mut predicted = vec![0.0; sc.constraint_count()];
    let mut total = 0.0;
    let mut bound_violation = 0.0f64;
    for (k, &w) in atoms.iter().enumerate() {
        bound_violation = bound_violation.max(-w).max(w - 1.0);
        total += w;
        if w == 0.0 {
            continue;
        }
        for (combo, b) in bits.iter().enumerate() {
            let r = b.iter().fold(0, |acc, &bit| acc << 1 | (k >> bit & 1));
            predicted[combo * t + r] += w;
        }
    }
    let max_residual = predicted
        .iter()
        .zip(p.values())
        .map(|(lhs, q)| (lhs - (v * q + (1.0 - v) * u)).abs())
        .fold(0.0, f64::max);
    let normalization_error = (total - 1.0).abs();
    let pass = max_residual <= tolerance && normalization_error <= tolerance && bound_violation <= tolerance;
    Ok(VerificationReport {
        max_residual,
        normalization_error,
        bound_violation,
        pass,
    })
}

/// Solves for the maximal visibility with default solver settings.
pub fn solve_max_visibility(lp: &LpProblem) -> Result<LhvSolution> {
    solve_with(lp, &SimplexOptions::default())
}

/// Solves `lp`, preferring the equivalent all-plus rows when the target is
/// no-signaling, and certifies the result against the full set of marginal
/// equalities. Numerical breakdown yields a solution with status
/// [`SolveStatus::InfeasibleNumerics`]; configuration problems are errors.
pub fn solve_with(lp: &LpProblem, opts: &SimplexOptions) -> Result<LhvSolution> {
    solve_from(lp, opts, None)
}

/// As [`solve_with`], warm-started from a basis of an earlier solve with the
/// same scenario. The optimum does not depend on the starting basis.
pub fn solve_from(lp: &LpProblem, opts: &SimplexOptions, warm: Option<&Basis>) -> Result<LhvSolution> {
    let target = lp.target();
    let mut attempts: Vec<LpProblem> = Vec::with_capacity(2);
    let reduce = lp.form() == RowForm::Marginal
        && target.max_signaling_deviation() <= SIGNALING_TOL
        && target.max_normalization_error() <= SIGNALING_TOL;
    if reduce {
        attempts.push(LpProblem::build_all_plus(target)?);
    }
    let mut failures = Vec::new();
    let mut last_stats = SimplexStats::default();
    for candidate in attempts.iter().chain(std::iter::once(lp)) {
        match simplex::solve_from(candidate, opts, warm) {
            Ok(out) => {
                let n = candidate.num_atoms();
                let v = out.values[n].clamp(0.0, 1.0);
                let atoms: Vec<f64> = out.values[..n]
                    .iter()
                    .map(|&p| if p < 0.0 && p > -1e-12 { 0.0 } else { p })
                    .collect();
                let report = verify_lhv_model(&atoms, v, target, CERTIFICATE_TOL)?;
                if report.pass {
                    return Ok(LhvSolution {
                        visibility: v,
                        atoms,
                        status: SolveStatus::Optimal,
                        residual: report.worst(),
                        stats: out.stats,
                        form: candidate.form(),
                        diagnostics: None,
                        basis: Some(out.basis),
                    });
                }
                last_stats = out.stats;
                failures.push(format!(
                    "{:?} rows: certificate residual {:.3e}",
                    candidate.form(),
                    report.worst()
                ));
            }
            Err(Error::Numerical(msg)) => failures.push(format!("{:?} rows: {msg}", candidate.form())),
            Err(e) => return Err(e),
        }
    }
    Ok(LhvSolution {
        visibility: f64::NAN,
        atoms: vec![0.0; lp.num_atoms()],
        status: SolveStatus::InfeasibleNumerics,
        residual: f64::INFINITY,
        stats: last_stats,
        form: lp.form(),
        diagnostics: Some(failures.join("; ")),
        basis: None,
    })
}

/// Critical visibility of `rho` for fixed observables: probability tensor,
/// program, solve.
pub fn critical_visibility(rho: &DensityMatrix, angles: &AngleConfiguration, scenario: &Scenario) -> Result<LhvSolution> {
    critical_visibility_from(rho, angles, scenario, None)
}

/// [`critical_visibility`] warm-started from `warm`.
pub fn critical_visibility_from(
    rho: &DensityMatrix,
    angles: &AngleConfiguration,
    scenario: &Scenario,
    warm: Option<&Basis>,
) -> Result<LhvSolution> {
    let p = probability_tensor(rho, angles, scenario)?;
    let lp = build_lp(&p, scenario)?;
    solve_from(&lp, &SimplexOptions::default(), warm)
}
