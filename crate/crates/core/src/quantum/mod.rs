//! States, white noise and quantum probabilities for dichotomic qubit
//! measurements.

pub mod density;
pub mod observable;
pub mod scenario;
pub mod states;
pub mod tensor;

pub use density::{mix_white_noise, DensityMatrix};
pub use observable::{projector, AngleConfiguration, Observable, Outcome};
pub use scenario::Scenario;
pub use states::{make_state, StateParams, StateSpec, FAMILIES};
pub use tensor::{apply_noise_to_tensor, probability_tensor, ProbabilityTensor};
