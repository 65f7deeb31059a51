use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration; the message names the offending key.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematical precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The estimator denominator vanished (e.g. an identically zero trajectory).
    #[error("degenerate trajectory: denominator D_N = {denominator:e} for N = {n}")]
    Degenerate { n: usize, denominator: f64 },

    /// Non-finite state detected while stepping.
    #[error("blow-up at step {step}, mode {mode}: value {value}")]
    BlowUp { step: usize, mode: usize, value: f64 },

    /// Too many failed trials in a Monte Carlo study.
    #[error("study failed: {0}")]
    Study(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 1,
            Error::Degenerate { .. } | Error::BlowUp { .. } | Error::Study(_) => 2,
            Error::Io(_) => 3,
        }
    }
}
