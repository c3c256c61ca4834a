use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse network document: {0}")]
    Parse(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "QP iteration limit of {limit} reached (primal residual {primal_residual:e}, dual residual {dual_residual:e})"
    )]
    IterationLimit {
        limit: usize,
        primal_residual: f64,
        dual_residual: f64,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("pattern budget exceeded: network has {hidden_units} hidden units ({patterns} patterns), cap is {cap}")]
    BudgetExceeded {
        hidden_units: usize,
        patterns: u128,
        cap: u128,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context: context.to_string(),
            expected,
            actual,
        })
    }
}
