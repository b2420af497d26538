use thiserror::Error;

/// Errors raised by model construction, solving and the complexity oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("number of sequences M must be at least 1")]
    ZeroSequences,

    #[error("field parameter q must exceed 1, got {0}")]
    FieldParamTooSmall(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("class map was built for M={expected}, state has M={found}")]
    ClassMapMismatch { expected: usize, found: usize },

    #[error("class search exceeded {cap} states in class {level} (M={m}, K0={k0})")]
    ClassCapExceeded { m: usize, k0: u32, level: u32, cap: usize },

    #[error("state {0} is not part of the bounded model")]
    UnknownState(String),

    #[error("power iteration did not converge after {iterations} round trips (last change {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("stationary nullspace has dimension != 1; the round-trip chain is not irreducible")]
    NullspaceDimension,

    #[error("distribution does not match the model: {0}")]
    DistributionShape(String),

    #[error("{0} is not prime")]
    NotPrime(u32),

    #[error("field order {0} is not supported (must be a prime below 65536)")]
    FieldTooLarge(u32),

    #[error("symbol {symbol} is not an element of F_{p}")]
    SymbolOutOfRange { symbol: u32, p: u32 },

    #[error("enumeration of {count} inputs exceeds the cap of {cap}; use monte_carlo instead")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("series digit {index} is too close to the balanced boundary; increase w")]
    SeriesBoundary { index: usize },

    #[error("series not integer-coefficient at this depth (digit {index} differs between bases)")]
    SeriesUnstable { index: usize },

    #[error("complexity trace disagrees with the battery model: {0}")]
    TraceMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
