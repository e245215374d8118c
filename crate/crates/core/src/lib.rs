//! Adaptive actor-critic optimal regulation for drift-free systems
//! `ẋ = g(x, θ) u` whose input gain depends linearly on unknown parameters.
//!
//! The crate is organized bottom-up:
//! - [`algebra`]: Kronecker/vectorization helpers and a small symmetric eigen solver
//! - [`plants`]: the parametric plant abstraction and the scalar, robot and visual servoing plants
//! - [`basis`]: the quadratic value-function basis
//! - [`learner`]: critic, actor and concurrent-learning parameter laws
//! - [`simulator`]: fixed-step closed-loop integration, logging and summaries
//! - [`presets`]: ready-made scenarios

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod basis;
pub mod error;
pub mod learner;
pub mod plants;
pub mod presets;
pub mod simulator;

pub use algebra::{Matrix, Vector};
pub use basis::QuadBasis;
pub use error::{Error, Result};
pub use learner::{GainConfig, HistoryStack, LearnerState, ParamLaw};
pub use plants::{Dims, PlantKind, PlantModel, TruthState};
pub use presets::Scenario;
pub use simulator::{run_closed_loop, summarize, RunError, RunOutput, SimConfig, Summary, TrajectoryLog};
