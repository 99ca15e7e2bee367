use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("query point ({x}, {z}) outside grid: {axis} must lie in [{lo}, {hi}]")]
    OutOfBounds {
        x: f64,
        z: f64,
        axis: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("group index undefined outside control beams (x = {x})")]
    GroupIndexUndefined { x: f64 },

    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("{0} outside the tabulated characteristic window")]
    OutsideTable(String),

    #[error("tau undefined for v0 = 0; use static-medium mode")]
    StaticMedium,

    #[error("pulse exits medium; not stored (need v0*B(z) = {needed}, window reaches {reached})")]
    PulseExits { needed: f64, reached: f64 },

    #[error("no second control laser configured")]
    NoSecondLaser,

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("CFL violation: dt = {dt} exceeds {bound_name} bound {bound}")]
    Cfl { dt: f64, bound_name: &'static str, bound: f64 },

    #[error("non-finite field value at step {step}")]
    NonFinite { step: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("all-zero field: centroid and width undefined")]
    ZeroField,

    #[error("profile does not fall to half maximum inside the grid")]
    WidthUndefined,

    #[error("config line {line}: {section}.{key}: {msg}")]
    Config {
        line: usize,
        section: String,
        key: String,
        msg: String,
    },

    #[error("config: missing section [{0}]")]
    MissingSection(String),

    #[error("snapshot {path}: unsupported version {found:?}")]
    SnapshotVersion { path: PathBuf, found: String },

    #[error("snapshot {path}: malformed header: {msg}")]
    SnapshotHeader { path: PathBuf, msg: String },

    #[error("snapshot {path}: payload count mismatch: header declares {expected} lines, found {found}")]
    PayloadCount { path: PathBuf, expected: usize, found: usize },

    #[error("snapshot {path} line {line}: bad data: {msg}")]
    SnapshotData { path: PathBuf, line: usize, msg: String },

    #[error("run directory {0}: {1}")]
    RunDir(PathBuf, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
