use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing matrix `mpc.{0}`")]
    MissingMatrix(&'static str),

    #[error("generator {gen}: piecewise-linear cost model is not supported")]
    UnsupportedCost { gen: usize },

    #[error("generator {gen}: polynomial cost of degree {degree} is not supported (max 2)")]
    UnsupportedCostDegree { gen: usize, degree: usize },

    #[error("{kind} row {row} references unknown bus {bus}")]
    UnknownBus { kind: &'static str, row: usize, bus: i64 },

    #[error("network has no reference (type 3) bus")]
    MissingReferenceBus,

    #[error("invalid network data: {0}")]
    InvalidNetwork(String),

    #[error("branch {branch}: series impedance is zero")]
    ZeroImpedance { branch: usize },

    #[error("bus {bus}: singular balance system (isolated bus without degrees of freedom)")]
    SingularBus { bus: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite {what} at trial point")]
    NonFinite { what: &'static str },

    #[error("ADMM diverged at outer {outer}, inner {inner}: residual norm {norm:e}")]
    Diverged { outer: usize, inner: usize, norm: f64 },

    #[error("generator {gen}: ramp window [{lo}, {hi}] does not intersect [{pmin}, {pmax}]")]
    InfeasibleRamp { gen: usize, lo: f64, hi: f64, pmin: f64, pmax: f64 },

    #[error("invalid load profile: {0}")]
    InvalidProfile(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
