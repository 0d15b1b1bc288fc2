use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a structural validation (probabilities, simplex, cut lists, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A value lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a probability space do not.
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    /// A precondition on agent attitudes or problem shape does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A numerical routine failed to converge or hit a degenerate configuration.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An exhaustive search was refused because it exceeds the combinatorial budget.
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
