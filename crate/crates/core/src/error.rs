use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("finite_places must contain 2")]
    MissingTwo,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("zero has infinite valuation")]
    InfiniteValuation,
    #[error("{0} is not an S-rational number")]
    NotSRational(String),
    #[error("{0} is a square (route it to the square-discriminant sum)")]
    Square(String),
    #[error("pole at {0}")]
    Pole(String),
    #[error("integrand does not decay along the contour (tail {tail:e})")]
    NoDecay { partial: Complex64, tail: f64 },
    #[error("truncation estimate {estimate:e} above tolerance {tolerance:e}")]
    Truncation { partial: Complex64, estimate: f64, tolerance: f64 },
    #[error("lattice oracle not saturated at depth {0}")]
    NotSaturated(u32),
    #[error("p-adic refinement exceeded depth cap {0}")]
    DepthCap(u32),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
