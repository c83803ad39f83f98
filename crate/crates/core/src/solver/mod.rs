//! Optimization backends used by the safety LP, the terminal-set computation
//! and the tube MPC.

pub mod lp;
pub mod qp;

pub use lp::{Bound, DenseSimplex, LinearProgram, LpBackend, LpOutcome};
pub use qp::{DualActiveSet, QpBackend, QpOutcome, QuadraticProgram};
