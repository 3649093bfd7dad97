//! Exact open-qubit dynamics driven by the memory coefficient `F(t)`.

mod memory;
mod propagate;
mod pulse;
mod superop;

pub use memory::{memory_derivative, MemoryState};
pub use propagate::{
    propagate, propagate_adjoint, propagate_costates, propagate_with_threshold, Costates,
    Trajectory, DEFAULT_BLOW_UP,
};
pub(crate) use propagate::{ForwardStepper, TrajectoryRecorder};
pub use pulse::{Bounds, ControlPulse};
pub use superop::{
    build_lindbladian, control_derivative, unvectorize, vectorize, Mat4, Superoperator, EE, EG, GE,
    GG,
};
