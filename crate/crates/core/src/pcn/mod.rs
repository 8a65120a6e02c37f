//! The generative predictive coding network: parameters, inference state,
//! energy, relaxation dynamics and local parameter updates.

mod inference;
mod model;
mod state;
mod update;

pub use inference::{inference_step, run_inference};
pub(crate) use inference::step_unchecked;
pub use model::PcnModel;
pub use state::{ClampSpec, InferenceState};
pub use update::{descent_direction, update_parameters, Optimizer, OptimizerState, ParamStep};
