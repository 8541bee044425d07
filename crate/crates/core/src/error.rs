use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-uniform frequency grid: gap at row {row} deviates {deviation_pct:.2}% from the mean spacing")]
    Grid { row: u64, deviation_pct: f64 },

    #[error("sample count must be odd, got {0}")]
    Parity(usize),

    #[error("half-period c = {c} V is smaller than the largest measured input {v_max} V")]
    PeriodTooSmall { c: f64, v_max: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numeric failures (as opposed to bad input) map to a distinct CLI exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Convergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
