use thiserror::Error;

use crate::resource_allocator::TraceRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("index {index} out of range for {len} subcarriers")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unbounded water level: the multiplier price of a subcarrier is zero")]
    UnboundedWaterLevel,
    #[error("solver did not converge after {iterations} iterations (violation {violation:.3e})")]
    NonConvergence { iterations: usize, violation: f64, trace: Vec<TraceRow> },
    #[error("allocation contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}
