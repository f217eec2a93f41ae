//! Viscous problem: implicit finite-volume stepper and the closed-form
//! resolvent used as its steady-state oracle.

pub mod grid;
pub mod resolvent;
pub mod stepper;

pub use grid::{DiscreteState, Grid, HRule, SolverConfig};
pub use stepper::{
    assemble_relaxed_operator, assemble_step_operator, l1_probe, march_to_steady, solve_parabolic, L1Report,
    StepDiagnostics, StepOperator, Trajectory, Warning,
};
pub use resolvent::{solve_resolvent, ArcResolvent, ResolventProblem, ResolventSolution};
