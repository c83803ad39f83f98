//! Stochastic model predictive control with probabilistic reachable sets and
//! optimized, time-varying constraint relaxation.
//!
//! Offline, [`synthesis::build_context`] computes the feedback gain, the
//! probabilistic reachable sets of the error and their zonotopic
//! over-approximations, and a terminal set. [`safety::solve_safety`] then
//! picks per-step relaxations with a linear program. Online,
//! [`tube_mpc::MpcProblem`] runs a tube MPC that honours the relaxed
//! tightening, and [`simulator`] estimates the achieved satisfaction rates.

// `!(x < y)` is used on purpose to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod case_study;
pub mod config;
pub mod error;
pub mod export;
pub mod linalg;
pub mod model;
pub mod par;
pub mod reachability;
pub mod safety;
pub mod setops;
pub mod simulator;
pub mod solver;
pub mod stats;
pub mod synthesis;
pub mod tube_mpc;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
pub use model::{NoiseFamily, NoiseModel, ProblemInstance};
pub use par::Execution;
