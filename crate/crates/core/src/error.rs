use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resolvent diverges (infinite) for d = {d} at lambda = {lambda}")]
    Divergent { d: usize, lambda: f64 },
    #[error("first-passage density is degenerate for a walk started at the origin")]
    StartsAtOrigin,
    #[error("grid too coarse: {0}")]
    CoarseGrid(String),
    #[error("no eigenvalue for beta = {beta} in d = {d}")]
    NoEigenvalue { beta: f64, d: usize },
    #[error("eigenfunction is not square summable in d = {d} at beta = {beta}")]
    NotSquareSummable { d: usize, beta: f64 },
    #[error("convergence diagnostic failed: {0}")]
    Convergence(String),
    #[error("effective sample size {ess:.1} below floor {floor}")]
    LowEss { ess: f64, floor: f64 },
    #[error("h-chain left the allowed box of radius {radius} at time {time:.3} (max excursion {max_radius})")]
    ChainEscaped {
        radius: i64,
        time: f64,
        max_radius: i64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
