//! Result records: TOML for full-precision storage, CSV for summaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{make_state, AngleConfiguration, Observable, Scenario, StateParams, StateSpec};
use crate::search::{evaluate_at, VisibilityResult};

/// Agreement required between a stored and a recomputed `v_crit`.
pub const REVERIFY_TOL: f64 = 1e-10;

/// State description in a result record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFields {
    pub family: String,
    pub qubits: Option<usize>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub phase: Option<f64>,
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub repair: bool,
}

impl StateFields {
    pub fn from_spec(spec: &StateSpec) -> Self {
        let mut f = StateFields {
            family: spec.family().to_string(),
            qubits: spec.qubits(),
            alpha: None,
            k: None,
            phase: None,
            file: None,
            repair: false,
        };
        match spec {
            StateSpec::Ghz { alpha, .. } => f.alpha = Some(*alpha),
            StateSpec::Dicke { k, .. } => f.k = Some(*k),
            StateSpec::Dur { phase, .. } => f.phase = Some(*phase),
            StateSpec::External { path, repair } => {
                f.qubits = None;
                f.file = Some(path.clone());
                f.repair = *repair;
            }
            _ => {}
        }
        f
    }

    pub fn to_spec(&self) -> Result<StateSpec> {
        let params = StateParams {
            alpha: self.alpha,
            k: self.k,
            phase: self.phase,
            file: self.file.clone(),
            repair: self.repair,
        };
        StateSpec::from_parts(&self.family, self.qubits, &params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub id: String,
    pub state: StateFields,
    pub scenario: String,
    pub v_crit: f64,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    /// `[theta, phi]` per setting, per observer.
    pub best_angles: Vec<Vec<[f64; 2]>>,
    pub per_restart: Vec<f64>,
    pub residual: f64,
    pub wall_time: f64,
    pub seed: u64,
    pub restarts: usize,
    pub lp_solves: u64,
    pub simplex_iterations: u64,
}

impl ResultRecord {
    pub fn new(
        id: &str,
        state: &StateSpec,
        scenario: &Scenario,
        result: &VisibilityResult,
        seed: u64,
        expected: Option<f64>,
        tolerance: Option<f64>,
    ) -> Self {
        ResultRecord {
            id: id.to_string(),
            state: StateFields::from_spec(state),
            scenario: scenario.to_string(),
            v_crit: result.v_crit,
            expected,
            tolerance: expected.and(tolerance),
            best_angles: result
                .best_angles
                .observers()
                .iter()
                .map(|s| s.iter().map(|o| [o.theta(), o.phi()]).collect())
                .collect(),
            per_restart: result.per_restart_values.clone(),
            residual: result.model.residual,
            wall_time: result.wall_time,
            seed,
            restarts: result.per_restart_values.len(),
            lp_solves: result.lp_solves,
            simplex_iterations: result.simplex_iterations,
        }
    }

    /// `None` without an expectation.
    pub fn passed(&self) -> Option<bool> {
        let x = self.expected?;
        Some((self.v_crit - x).abs() <= self.tolerance.unwrap_or(super::manifest::DEFAULT_TOLERANCE))
    }

    pub fn angles(&self) -> AngleConfiguration {
        AngleConfiguration::new(
            self.best_angles
                .iter()
                .map(|s| s.iter().map(|&[t, p]| Observable::new(t, p)).collect())
                .collect(),
        )
    }

    /// Recomputes the critical visibility at the stored angles and returns it
    /// if it agrees with `v_crit` to within [`REVERIFY_TOL`].
    pub fn reverify(&self) -> Result<f64> {
        let spec = self.state.to_spec()?;
        let rho = make_state(&spec)?;
        let scenario: Scenario = self.scenario.parse()?;
        let sol = evaluate_at(&rho, &scenario, &self.angles())?;
        if !sol.is_certified() || (sol.visibility - self.v_crit).abs() > REVERIFY_TOL {
            return Err(Error::Numerical(format!(
                "record {}: stored v_crit {} but recomputed {}",
                self.id, self.v_crit, sol.visibility
            )));
        }
        Ok(sol.visibility)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultsFile {
    #[serde(default)]
    result: Vec<ResultRecord>,
}

pub fn format_results(records: &[ResultRecord]) -> Result<String> {
    let file = ResultsFile { result: records.to_vec() };
    toml::to_string(&file).map_err(|e| Error::Config(format!("cannot serialize results: {e}")))
}

pub fn parse_results(text: &str, source_name: &str) -> Result<Vec<ResultRecord>> {
    let file: ResultsFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::parse(source_name, line, e.message().trim().to_string())
    })?;
    Ok(file.result)
}

/// Writes to a temporary file in the target directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_results(records: &[ResultRecord], path: &Path) -> Result<()> {
    write_atomic(path, format_results(records)?.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_results(&text, &path.display().to_string())
}

/// One line of a CSV summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub id: String,
    pub state: String,
    pub scenario: String,
    /// `None` when the run failed.
    pub v_crit: Option<f64>,
    pub expected: Option<f64>,
    pub residual: Option<f64>,
    pub seconds: f64,
    pub status: &'static str,
}

impl From<&ResultRecord> for SummaryRow {
    fn from(r: &ResultRecord) -> Self {
        SummaryRow {
            id: r.id.clone(),
            state: r.state.to_spec().map_or_else(|_| r.state.family.clone(), |s| s.to_string()),
            scenario: r.scenario.clone(),
            v_crit: Some(r.v_crit),
            expected: r.expected,
            residual: Some(r.residual),
            seconds: r.wall_time,
            status: status(r.passed()),
        }
    }
}

/// CSV with columns `id, state, scenario, v_crit, expected, residual,
/// seconds`, plus `status` when `with_status` is set.
pub fn write_csv<W: Write>(rows: &[SummaryRow], out: W, with_status: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id", "state", "scenario", "v_crit", "expected", "residual", "seconds"];
    if with_status {
        header.push("status");
    }
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        let mut row = vec![
            r.id.clone(),
            r.state.clone(),
            r.scenario.clone(),
            r.v_crit.map(format_visibility).unwrap_or_default(),
            r.expected.map(|x| x.to_string()).unwrap_or_default(),
            r.residual.map(|x| format!("{x:.3e}")).unwrap_or_default(),
            format!("{:.3}", r.seconds),
        ];
        if with_status {
            row.push(r.status.to_string());
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Fourteen significant digits.
pub fn format_visibility(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let decimals = (13 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn status(passed: Option<bool>) -> &'static str {
    match passed {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "n/a",
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}
