//! Critical white-noise visibility for multiqubit Bell experiments.
//!
//! For a state `rho` and a choice of dichotomic local observables, the largest
//! visibility `v` at which `v rho + (1 - v) 1/2^N` still admits a local hidden
//! variable model is the optimum of a linear program over the joint outcome
//! distribution. Minimizing that optimum over measurement angles yields the
//! state's critical visibility.
//!
//! * [`quantum`]: states, white noise, observables and probability tensors.
//! * [`lp`]: the linear program, a bounded revised simplex solver and model
//!   certificates.
//! * [`search`]: downhill-simplex multistart minimization over angles.
//! * [`io`]: density matrix, angle, model, manifest and result file formats.

pub mod error;
pub mod io;
pub mod lp;
pub mod quantum;
pub mod search;

pub use error::{Error, Result};
pub use lp::{critical_visibility, solve_max_visibility, verify_lhv_model, LhvSolution, LpProblem};
pub use quantum::{
    make_state, mix_white_noise, probability_tensor, AngleConfiguration, DensityMatrix,
    Observable, Outcome, ProbabilityTensor, Scenario, StateSpec,
};
pub use search::{evaluate_at, minimize_vcrit, SearchOptions, VisibilityResult};
