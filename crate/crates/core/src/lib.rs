//! Joint age-of-information and energy scheduling for correlated IoT
//! devices, posed as an average-cost MDP and solved by relative value
//! iteration.
//!
//! Everything numeric is generic over [`Scalar`]; `f64`, `f32` and exact
//! rationals ([`Exact`]) are supported.

// `!(a < b)` is deliberate in validation: NaN has to fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod solver;
pub mod special_case;
pub mod structure;

pub use error::{Error, Result};
pub use kernel::Kernel;
pub use model::{
    Action, ActionSpace, ChannelModel, DeviceKind, DeviceSpec, State, StateSpace, SystemConfig,
    NOOP,
};
pub use scalar::{Exact, Scalar};
pub use solver::{relative_value_iteration, PolicyTable, Solution, SolveOptions, ValueFunction};

pub type SystemConfigF64 = SystemConfig<f64>;
pub type SystemConfigF32 = SystemConfig<f32>;
pub type ExactConfig = SystemConfig<Exact>;
pub type KernelF64 = Kernel<f64>;
pub type ValueFunctionF64 = ValueFunction<f64>;
pub type SolutionF64 = Solution<f64>;
pub type SolveOptionsF64 = SolveOptions<f64>;
