use thiserror::Error;

use crate::sim::Trace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// A design premise does not hold (e.g. the matrix handed to the
    /// Lyapunov solver is not Hurwitz).
    #[error("design error: {0}")]
    Design(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Simulation produced a non-finite or runaway state. `partial` holds
    /// every sample up to and including `at`.
    #[error("simulation diverged after t = {at}")]
    Diverged { at: f64, partial: Box<Trace> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
