use thiserror::Error;

/// Errors produced anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, factor indices or layouts that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A physically inconsistent or unsupported configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A spectral construction produced an unexpected degeneracy.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// The time integrator could not make progress.
    #[error("integrator failure at t = {time_ns} ns: {reason}")]
    Integrator { time_ns: f64, reason: String },

    /// A single quantum trajectory failed.
    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// The requested solver cannot handle this problem size.
    #[error("solver refused: {0}")]
    SolverRefused(String),

    #[error(transparent)]
    Fit(#[from] crate::analysis::FitError),

    #[error("unknown preset `{0}` (try `aklt presets list`)")]
    UnknownPreset(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}
