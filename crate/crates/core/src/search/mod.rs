//! Minimization of the critical visibility over measurement angles.
//!
//! Each restart draws a random start (`theta` uniform in `[0, pi)`, `phi` in
//! `[0, 2 pi)`) from its own ChaCha stream and runs a downhill simplex
//! descent on the fixed-angle critical visibility. The objective is periodic
//! in every angle, so the simplex moves freely and points are wrapped into
//! the canonical ranges only when they are evaluated.
//!
//! At fixed angles the visibility is a minimum over many Bell inequalities,
//! so the landscape is piecewise smooth with plenty of local minima. A
//! restart therefore descends coarsely, then tries a few random kicks away
//! from its best point, keeping any that lead lower, and finishes with a
//! tight descent from the winner.

pub mod nelder_mead;

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{critical_visibility, critical_visibility_from, Basis, LhvSolution};
use crate::quantum::observable::wrap;
use crate::quantum::{make_state, AngleConfiguration, DensityMatrix, Scenario, StateSpec};
use nelder_mead::{minimize, NelderMeadOptions};

/// Grid on which evaluated angles are cached.
const CACHE_QUANTUM: f64 = 1e-12;
/// Convergence tolerances of the coarse descents before the final polish.
const EXPLORE_F_TOL: f64 = 1e-4;
const EXPLORE_X_TOL: f64 = 1e-3;
/// A kick is kept only if it lowers the value by more than this.
const KICK_GAIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub restarts: usize,
    /// Simplex iterations per restart, shared by all its descents; `None`
    /// means `2000` per dimension.
    pub max_iterations: Option<usize>,
    pub f_tol: f64,
    pub x_tol: f64,
    pub seed: u64,
    /// Initial simplex edge of the final polish, in radians.
    pub initial_step: f64,
    /// Initial simplex edge of the coarse descents.
    pub explore_step: f64,
    /// Random perturbations tried from each restart's best point.
    pub kicks: usize,
    /// Each coordinate of a kick is shifted uniformly within `+-kick_size`.
    pub kick_size: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            restarts: 20,
            max_iterations: None,
            f_tol: 1e-7,
            x_tol: 1e-5,
            seed: 0,
            initial_step: 0.35,
            explore_step: FRAC_PI_2,
            kicks: 5,
            kick_size: 0.8,
        }
    }
}

impl SearchOptions {
    /// Defaults with the restart count scaled to the scenario: 20 up to eight
    /// settings in total, 50 above.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        SearchOptions {
            restarts: default_restarts(scenario),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("f_tol", self.f_tol),
            ("x_tol", self.x_tol),
            ("initial_step", self.initial_step),
            ("explore_step", self.explore_step),
            ("kick_size", self.kick_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn iteration_limit(&self, dims: usize) -> usize {
        self.max_iterations.unwrap_or(2000 * dims)
    }
}

pub fn default_restarts(scenario: &Scenario) -> usize {
    if scenario.total_settings() <= 8 {
        20
    } else {
        50
    }
}

#[derive(Clone, Debug)]
pub struct VisibilityResult {
    pub v_crit: f64,
    pub best_angles: AngleConfiguration,
    pub model: LhvSolution,
    /// Best value reached by each restart; `+inf` for restarts whose every
    /// evaluation failed.
    pub per_restart_values: Vec<f64>,
    /// Seconds.
    pub wall_time: f64,
    pub lp_solves: u64,
    pub simplex_iterations: u64,
}

/// Critical visibility at fixed angles.
pub fn evaluate_at(rho: &DensityMatrix, scenario: &Scenario, angles: &AngleConfiguration) -> Result<LhvSolution> {
    check_inputs(rho, scenario)?;
    angles.check(scenario)?;
    critical_visibility(rho, angles, scenario)
}

fn check_inputs(rho: &DensityMatrix, scenario: &Scenario) -> Result<()> {
    if rho.qubits() != scenario.num_observers() {
        return Err(Error::Config(format!(
            "state has {} qubits but scenario {scenario} has {} observers",
            rho.qubits(),
            scenario.num_observers()
        )));
    }
    Ok(())
}

/// Maps search coordinates onto canonical angles.
fn wrap_point(x: &[f64]) -> Vec<f64> {
    x.chunks_exact(2)
        .flat_map(|c| [wrap(c[0], PI), wrap(c[1], 2.0 * PI)])
        .collect()
}

struct RestartOutcome {
    value: f64,
    angles: Vec<f64>,
    lp_solves: u64,
    simplex_iterations: u64,
    last_error: Option<String>,
}

fn random_point(rng: &mut ChaCha8Rng, dims: usize) -> Vec<f64> {
    (0..dims)
        .map(|i| if i % 2 == 0 { rng.gen_range(0.0..PI) } else { rng.gen_range(0.0..2.0 * PI) })
        .collect()
}

fn run_restart(rho: &DensityMatrix, scenario: &Scenario, opts: &SearchOptions, index: usize) -> RestartOutcome {
    let dims = 2 * scenario.total_settings();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let start = random_point(&mut rng, dims);

    let mut cache: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut lp_solves = 0u64;
    let mut simplex_iterations = 0u64;
    let mut last_error = None;
    // Neighbouring angle points share most of their optimal basis.
    let mut warm: Option<Basis> = None;
    let mut objective = |x: &[f64]| -> f64 {
        let w = wrap_point(x);
        let key: Vec<i64> = w.iter().map(|a| (a / CACHE_QUANTUM).round() as i64).collect();
        if let Some(&v) = cache.get(&key) {
            return v;
        }
        lp_solves += 1;
        let value = match AngleConfiguration::from_flat(&w, scenario)
            .and_then(|angles| critical_visibility_from(rho, &angles, scenario, warm.as_ref()))
        {
            Ok(sol) => {
                simplex_iterations += sol.stats.iterations as u64;
                if sol.basis.is_some() {
                    warm = sol.basis.clone();
                }
                if sol.is_certified() {
                    sol.visibility
                } else {
                    last_error = sol.diagnostics;
                    f64::INFINITY
                }
            }
            Err(e) => {
                last_error = Some(e.to_string());
                f64::INFINITY
            }
        };
        cache.insert(key, value);
        value
    };

    let mut budget = opts.iteration_limit(dims);
    let explore = |budget: usize| NelderMeadOptions {
        initial_step: opts.explore_step,
        f_tol: EXPLORE_F_TOL.max(opts.f_tol),
        x_tol: EXPLORE_X_TOL.max(opts.x_tol),
        max_iterations: budget,
        polish_restarts: 0,
    };
    let mut best = minimize(&mut objective, &start, &explore(budget));
    budget = budget.saturating_sub(best.iterations);
    for _ in 0..opts.kicks {
        if budget == 0 {
            break;
        }
        let kicked: Vec<f64> = best.x.iter().map(|v| v + rng.gen_range(-opts.kick_size..=opts.kick_size)).collect();
        let r = minimize(&mut objective, &kicked, &explore(budget));
        budget = budget.saturating_sub(r.iterations);
        if r.f < best.f - KICK_GAIN {
            best = r;
        }
    }
    if budget > 0 {
        let polish = NelderMeadOptions {
            initial_step: opts.initial_step,
            f_tol: opts.f_tol,
            x_tol: opts.x_tol,
            max_iterations: budget,
            polish_restarts: 2,
        };
        let r = minimize(&mut objective, &best.x, &polish);
        if r.f <= best.f {
            best = r;
        }
    }

    // Warm-started values can differ from a cold solve in the last bits;
    // report the cold value so that results are reproducible point by point.
    let angles = wrap_point(&best.x);
    let value = if best.f.is_finite() {
        match AngleConfiguration::from_flat(&angles, scenario).and_then(|a| critical_visibility(rho, &a, scenario)) {
            Ok(sol) if sol.is_certified() => {
                lp_solves += 1;
                simplex_iterations += sol.stats.iterations as u64;
                sol.visibility
            }
            Ok(sol) => {
                last_error = sol.diagnostics;
                f64::INFINITY
            }
            Err(e) => {
                last_error = Some(e.to_string());
                f64::INFINITY
            }
        }
    } else {
        f64::INFINITY
    };
    log::debug!("restart {index}: v = {value:.14} after {lp_solves} LP solves");
    RestartOutcome {
        value,
        angles,
        lp_solves,
        simplex_iterations,
        last_error,
    }
}

/// Multistart downhill-simplex minimization of the critical visibility.
///
/// The result is an upper bound on the minimal critical visibility: each
/// descent may stop in a local minimum. Restarts run in parallel but the
/// outcome depends only on `opts.seed`.
pub fn minimize_vcrit(rho: &DensityMatrix, scenario: &Scenario, opts: &SearchOptions) -> Result<VisibilityResult> {
    opts.validate()?;
    check_inputs(rho, scenario)?;
    let started = Instant::now();
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| run_restart(rho, scenario, opts, i))
        .collect();

    let per_restart_values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let lp_solves = outcomes.iter().map(|o| o.lp_solves).sum();
    let mut simplex_iterations = outcomes.iter().map(|o| o.simplex_iterations).sum();
    let best = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.value.is_finite())
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .map(|(_, o)| o);
    let Some(best) = best else {
        let diagnostics: Vec<String> = outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| format!("restart {i}: {}", o.last_error.as_deref().unwrap_or("no certified solution")))
            .collect();
        return Err(Error::Numerical(format!("all restarts failed: {}", diagnostics.join("; "))));
    };

    let best_angles = AngleConfiguration::from_flat(&best.angles, scenario)?;
    let model = critical_visibility(rho, &best_angles, scenario)?;
    simplex_iterations += model.stats.iterations as u64;
    if !model.is_certified() || model.visibility.to_bits() != best.value.to_bits() {
        return Err(Error::Numerical(format!(
            "re-evaluation at the best angles gave {} instead of {}",
            model.visibility, best.value
        )));
    }
    Ok(VisibilityResult {
        v_crit: model.visibility,
        best_angles,
        model,
        per_restart_values,
        wall_time: started.elapsed().as_secs_f64(),
        lp_solves,
        simplex_iterations,
    })
}

/// Searches a singlet shared by the first two observers with one maximally
/// mixed idle qubit, in the 2x2x2 scenario.
pub fn product_noise_study(opts: &SearchOptions) -> Result<VisibilityResult> {
    let rho = make_state(&StateSpec::Singlet { idle: 1 })?;
    let scenario = Scenario::uniform(3, 2)?;
    minimize_vcrit(&rho, &scenario, opts)
}
