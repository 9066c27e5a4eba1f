//! Experiment harness: scenarios, references, Monte Carlo trials and CSV
//! output.

pub mod reference;
pub mod runner;
pub mod sampling;
pub mod scenario;
pub mod sweep;

pub use reference::{generate_reference, ConstantTwist, PoseSteps, ReferenceSpec, Tabulated};
pub use runner::{run_scenario, run_trial, write_results, TrialResult, TrialRow, TrialStatus, TrialSummary};
pub use sampling::{sample_initial_poses, Dispersion};
pub use scenario::Scenario;
pub use sweep::{error_scale_sweep, SweepRow};
