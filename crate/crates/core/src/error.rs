use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{a} is not invertible modulo {k}")]
    NonInvertible { a: i64, k: u64 },
    #[error("imaginary residue {residue:e} in S({a},{b};{c})")]
    ImaginaryResidue { a: i64, b: i64, c: u64, residue: f64 },
    #[error("k must be prime (got {0})")]
    NotPrime(u64),
    #[error("no seed for prime {0}")]
    MissingSeed(u64),
    #[error("index {index} exceeds table size {max}")]
    OutOfRange { index: u64, max: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),
    #[error("unsupported coefficient source: {0}")]
    UnsupportedSource(String),
    #[error("insufficient data: need M >= {needed}, have {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("pole of {0}")]
    Pole(String),
    #[error("contour violation: {0}")]
    ContourViolation(String),
    #[error("tail estimate {tail:e} exceeds 1e-3 of |value| = {value:e}")]
    NonConvergent { tail: f64, value: f64 },
    #[error("y = {y:e} is below the asymptotic threshold {threshold:e}")]
    BelowThreshold { y: f64, threshold: f64 },
    #[error("series error {est_error:e} does not reach tolerance {tol:e}")]
    SlowConvergence { est_error: f64, tol: f64 },
    #[error("Gamma pole: {0}")]
    GammaPole(String),
    #[error("{0}")]
    RangeViolation(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("cache: {0}")]
    Cache(String),
}

impl Error {
    /// True for errors caused by bad input rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::ImaginaryResidue { .. }
                | Error::Pole(_)
                | Error::NonConvergent { .. }
                | Error::SlowConvergence { .. }
                | Error::GammaPole(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
