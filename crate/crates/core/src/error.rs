use alloc::string::String;

/// Errors produced by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is outside [{min}, {max}]")]
    Domain {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model not calibrated: {0}")]
    Uncalibrated(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e} A)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular circuit matrix at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("circuit structure: {0}")]
    Structure(String),
    #[error("exhaustive enumeration needs {needed} patterns but the budget is {budget}")]
    Budget { needed: u128, budget: u64 },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: f64, min: f64, max: f64) -> Result<f64> {
    if value.is_finite() && value >= min && value <= max {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            min,
            max,
        })
    }
}
