use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched lengths, empty meshes and similar malformed inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("non-finite value while integrating the datum at x = {x}")]
    NonFiniteDatum { x: f64 },

    /// The discrete solution left the bounded regime: a non-finite entry or a
    /// sup-norm above the blow-up threshold.
    #[error("instability at step {step} (t = {time}): sup-norm {norm:e}")]
    Instability { step: usize, time: f64, norm: f64 },

    #[error("history state is stale: expected entries through index {expected}, have {have}")]
    StaleHistory { expected: usize, have: usize },

    #[error("lag {lag} is outside the window [{lo}, {hi}] of Talbot level {level}")]
    LevelMismatch {
        lag: usize,
        level: usize,
        lo: usize,
        hi: usize,
    },

    #[error("evaluation at a pole: {0}")]
    Pole(String),

    #[error("rate undefined for errors ({coarse}, {fine})")]
    UndefinedRate { coarse: f64, fine: f64 },
}

impl Error {
    /// Stable short name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidInput(_) => "invalid_input",
            Error::ZeroPivot { .. } => "zero_pivot",
            Error::NonFiniteDatum { .. } => "non_finite_datum",
            Error::Instability { .. } => "instability",
            Error::StaleHistory { .. } => "stale_history",
            Error::LevelMismatch { .. } => "level_mismatch",
            Error::Pole(_) => "pole",
            Error::UndefinedRate { .. } => "undefined_rate",
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
