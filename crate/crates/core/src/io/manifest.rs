//! Run manifests: TOML lists of `[[entry]]` tables, each naming a state, a
//! scenario and optional search settings and expectation.
//!
//! ```toml
//! [[entry]]
//! id = "1"
//! state = "ghz"
//! qubits = 2
//! alpha = "pi/4"
//! settings = "2x2"
//! expected = 0.7071
//! tolerance = 5e-4
//! ```
//!
//! Unknown keys are rejected. Relative `file` paths are resolved against the
//! manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::angles::parse_angle;
use crate::error::{Error, Result};
use crate::quantum::{Scenario, StateParams, StateSpec};
use crate::search::{default_restarts, SearchOptions};

/// Tolerance applied to expectations that do not state one.
pub const DEFAULT_TOLERANCE: f64 = 5e-4;

/// A number, or an angle expression such as `"pi/4"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radians {
    Value(f64),
    Expr(String),
}

impl Radians {
    fn resolve(&self) -> std::result::Result<f64, String> {
        match self {
            Radians::Value(v) if v.is_finite() => Ok(*v),
            Radians::Value(v) => Err(format!("angle {v} is not finite")),
            Radians::Expr(s) => parse_angle(s),
        }
    }
}

/// A scenario as `"2x2x3"` or `[2, 2, 3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Settings {
    Text(String),
    List(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    state: String,
    qubits: Option<usize>,
    alpha: Option<Radians>,
    k: Option<usize>,
    phase: Option<Radians>,
    file: Option<PathBuf>,
    #[serde(default)]
    repair: bool,
    settings: Settings,
    expected: Option<f64>,
    tolerance: Option<f64>,
    restarts: Option<usize>,
    seed: Option<u64>,
    max_iterations: Option<usize>,
    initial_step: Option<f64>,
    #[serde(default)]
    opt_in: bool,
    comment: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    entry: Vec<Spanned<RawEntry>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub state: StateSpec,
    pub scenario: Scenario,
    pub options: SearchOptions,
    pub expected: Option<f64>,
    pub tolerance: f64,
    /// Entries too expensive for routine runs; skipped unless requested.
    pub opt_in: bool,
    pub comment: Option<String>,
    /// Line of the entry's table header, for diagnostics.
    pub line: usize,
}

impl ManifestEntry {
    /// Whether `v` meets the expectation; `None` when there is none.
    pub fn check(&self, v: f64) -> Option<bool> {
        self.expected.map(|x| (v - x).abs() <= self.tolerance)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    /// Entries whose id is in `ids` (all when `None`), dropping opt-in
    /// entries unless `include_opt_in` is set or they are named explicitly.
    pub fn select(&self, ids: Option<&[String]>, include_opt_in: bool) -> Result<Vec<&ManifestEntry>> {
        match ids {
            None => Ok(self.entries.iter().filter(|e| include_opt_in || !e.opt_in).collect()),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    self.entries
                        .iter()
                        .find(|e| e.id == *id)
                        .ok_or_else(|| Error::Config(format!("no manifest entry with id {id:?}")))
                })
                .collect(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn parse_manifest(text: &str, source_name: &str, base_dir: &Path) -> Result<RunManifest> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(text, s.start));
        Error::parse(source_name, line, e.message().trim().to_string())
    })?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.entry.len());
    for spanned in raw.entry {
        let line = line_of(text, spanned.span().start);
        let raw = spanned.into_inner();
        let fail = |field: &str, msg: String| Error::parse(source_name, line, format!("entry {:?}, field `{field}`: {msg}", raw.id));
        if !seen.insert(raw.id.clone()) {
            return Err(fail("id", "duplicate id".into()));
        }
        let scenario = match &raw.settings {
            Settings::Text(s) => s.parse::<Scenario>(),
            Settings::List(v) => Scenario::new(v.clone()),
        }
        .map_err(|e| fail("settings", e.to_string()))?;
        let alpha = raw.alpha.as_ref().map(Radians::resolve).transpose().map_err(|m| fail("alpha", m))?;
        let phase = raw.phase.as_ref().map(Radians::resolve).transpose().map_err(|m| fail("phase", m))?;
        let params = StateParams {
            alpha,
            k: raw.k,
            phase,
            file: raw.file.as_ref().map(|p| if p.is_relative() { base_dir.join(p) } else { p.clone() }),
            repair: raw.repair,
        };
        let state = StateSpec::from_parts(&raw.state, raw.qubits, &params).map_err(|e| fail("state", e.to_string()))?;
        if let Some(q) = state.qubits() {
            if q != scenario.num_observers() {
                return Err(fail(
                    "settings",
                    format!("{} observers for a {q}-qubit state", scenario.num_observers()),
                ));
            }
        }
        if let Some(x) = raw.expected {
            if !(0.0..=1.0).contains(&x) {
                return Err(fail("expected", format!("{x} is not a visibility")));
            }
        }
        let tolerance = raw.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(fail("tolerance", format!("must be positive, got {tolerance}")));
        }
        let options = SearchOptions {
            restarts: raw.restarts.unwrap_or_else(|| default_restarts(&scenario)),
            max_iterations: raw.max_iterations,
            seed: raw.seed.unwrap_or(0),
            initial_step: raw.initial_step.unwrap_or(SearchOptions::default().initial_step),
            ..SearchOptions::default()
        };
        options.validate().map_err(|e| fail("options", e.to_string()))?;
        entries.push(ManifestEntry {
            id: raw.id,
            state,
            scenario,
            options,
            expected: raw.expected,
            tolerance,
            opt_in: raw.opt_in,
            comment: raw.comment,
            line,
        });
    }
    Ok(RunManifest { entries })
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, &path.display().to_string(), base)
}
