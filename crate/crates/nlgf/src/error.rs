use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature order must be an odd integer >= 3, got {0}")]
    BadQuadratureOrder(usize),

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },

    #[error("{name} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance coefficients must contain at least one positive entry")]
    EmptyCovariance,

    #[error("covariance coefficient c_{index} = {value} is negative")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("field of {requested} coefficients exceeds the budget of {budget}")]
    FieldBudget { requested: u128, budget: u128 },

    #[error("label entries must be +1 or -1")]
    BadLabel,

    #[error("enumeration over {k} spins exceeds the exhaustive-posterior cap of {cap}")]
    EnumerationCap { k: usize, cap: usize },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed field dump: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Negative { name, value })
    }
}

pub(crate) fn ensure_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}
