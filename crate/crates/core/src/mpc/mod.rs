//! Error-state model predictive control on SE(3).

pub mod controller;
pub mod error_state;
pub mod horizon;
pub mod model;
pub mod riccati;

pub use controller::{mpc_step, solve_mpc, ControllerMemory, ErrorStateMpc, MpcConfig, MpcStep, PlantModel, Reference};
pub use error_state::{compatible_error, exact_error_rate, linearized_error_rate, tracking_error, TrackingError};
pub use horizon::{build_qp, warm_start, HorizonData, HorizonLayout, HorizonQp, InputConstraints, OutputMap};
pub use model::{
    build_ct_system, build_ct_system_with_input, discretize, linearize_twist_dynamics, output_map, CtMatrices,
    Discretization, DiscreteModel, Mat12, TwistLinearization, Variant, Vec12, STATE_DIM,
};
pub use riccati::{dare_residual, riccati_step, riccati_terminal, solve_dare, DareSolution, TerminalMode};
