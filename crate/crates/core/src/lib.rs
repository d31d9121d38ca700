//! Component-decomposed, two-level ADMM for AC optimal power flow.
//!
//! A network is split into generator, branch and bus components that agree
//! on duplicated coupling variables through consensus rows
//! `x - x̄ + z = 0`. Generators, buses, the artificial `z` block and all
//! multiplier updates have closed forms; every branch is a small
//! bound-constrained nonconvex NLP solved in batch by a trust-region Newton
//! method. An outer augmented-Lagrangian loop drives `z` to zero.
//!
//! Module map:
//!
//! - [`netdata`]: MATPOWER parsing, per-unit network model, branch admittances.
//! - [`decomp`]: coupling layout, iterate vectors and residuals.
//! - [`tron`]: batch bound-constrained trust-region Newton solver.
//! - [`kernels`]: per-component update rules of one inner iteration.
//! - [`driver`]: the two-level loop, cold start and solution metrics.
//! - [`tracking`]: warm-started multi-period solves with ramp limits.
//! - [`report`]: run manifest, gap computation and output artifacts used by the CLI.

pub mod decomp;
pub mod driver;
mod error;
pub mod kernels;
pub mod netdata;
pub mod report;
pub mod tracking;
pub mod tron;

pub use crate::decomp::{AdmmState, CouplingLayout, PenaltyClass};
pub use crate::driver::{
    cold_start, evaluate_solution, solve, Solution, SolveReport, SolveStatus, SolverConfig,
};
pub use crate::error::{Error, Result};
pub use crate::netdata::{parse_matpower, Branch, Bus, BusType, Generator, PowerNetwork};
pub use crate::tracking::{run_tracking, TrackingScenario};
