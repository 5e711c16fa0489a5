use std::path::PathBuf;

use thiserror::Error;

use crate::splitting::SchemeViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate region: no mesh node lies in {0}")]
    DegenerateRegion(String),

    #[error("point outside mesh domain: coordinate {axis} = {value} not in [0, {upper}]")]
    OutOfDomain { axis: usize, value: f64, upper: f64 },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shifted matrix I - gamma*A is singular for gamma = {re}{im:+}i (pivot {pivot})")]
    SingularShift { re: f64, im: f64, pivot: usize },

    #[error("non-finite intermediate in Krylov iteration {iteration}")]
    KrylovBreakdown { iteration: usize },

    #[error("propagator only accepts real nonnegative times, got {re}{im:+}i")]
    ComplexTimeRejected { re: f64, im: f64 },

    #[error("invalid splitting scheme: {}", format_violations(.0))]
    InvalidScheme(Vec<SchemeViolation>),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

fn format_violations(v: &[SchemeViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
