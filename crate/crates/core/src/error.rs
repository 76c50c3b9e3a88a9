use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("site index {index} out of range 1..={n}")]
    SiteOutOfRange { index: usize, n: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (norm {norm:.12})")]
    NotNormalized { norm: f64 },

    #[error("state has weight {weight:.3e} outside excitation sector {sector}")]
    SectorLeakage { sector: usize, weight: f64 },

    #[error("cavity dimension {cavity_dim} cannot hold {photons} photons")]
    GeometryTooSmall { cavity_dim: usize, photons: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("expectation value has imaginary part {0:.3e}")]
    ComplexExpectation(f64),

    #[error("ergotropy {0:.3e} is negative beyond roundoff")]
    NegativeErgotropy(f64),

    #[error("capacity undefined: E_max equals E_G ({0})")]
    UndefinedCapacity(f64),

    #[error("no local maximum of the charged energy found before t = {t_max}")]
    NoPeakFound { t_max: f64 },

    #[error("grid too coarse: ground sector changes by more than one crossing between J = {j_lo} and J = {j_hi}")]
    GridTooCoarse { j_lo: f64, j_hi: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("conservation violated: {0}")]
    Conservation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
