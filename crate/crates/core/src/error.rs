use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("inverse transform is not real: imaginary residual {residual:.3e} (relative)")]
    NonRealSynthesis { residual: f64 },

    #[error("lattice index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("field file: {0}")]
    FieldFile(#[from] FieldFileError),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("s = 1/2 kernel violates the cancellation condition (first moment {moment:.3e})")]
    CancellationViolated { moment: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: successive levels {coarse:.12e} vs {fine:.12e}")]
    QuadratureNotConverged { coarse: f64, fine: f64 },

    #[error("tail remainder {bound:.3e} exceeds tolerance {tol:.3e}")]
    TailTooLarge { bound: f64, tol: f64 },

    #[error("certified remainder {bound:.3e} exceeds tolerance {tol:.3e}")]
    CertificationFailed { bound: f64, tol: f64 },

    #[error("at lattice index {index}: {source}")]
    AtMode {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mode {index} is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { index: usize, cond: f64 },

    #[error("iteration diverged at tau = {tau} after {iterations} iterations (residual {residual:.3e})")]
    Diverged {
        tau: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("iteration did not converge at tau = {tau} within {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        tau: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("field is not band-limited: mode energy {energy:.3e} in the top third of the spectrum")]
    NotBandLimited { energy: f64 },

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("matrix exponential failed: {0}")]
    Exponential(String),

    #[error("symbol quadrature disagrees with the oracle at xi = {xi:?}: relative discrepancy {discrepancy:.3e}")]
    OracleDisagreement { xi: Vec<f64>, discrepancy: f64 },
}

/// Errors raised while reading or writing NLSF field files.
#[derive(Debug, Error)]
pub enum FieldFileError {
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("unsupported dimension {0}")]
    Dimension(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("invalid header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FieldFileError {
    /// Stable numeric code for each failure class.
    pub fn code(&self) -> u32 {
        match self {
            FieldFileError::BadMagic(_) => 10,
            FieldFileError::Version(_) => 11,
            FieldFileError::Dimension(_) => 12,
            FieldFileError::Truncated { .. } => 13,
            FieldFileError::Trailing(_) => 14,
            FieldFileError::Header(_) => 15,
            FieldFileError::Io(_) => 16,
        }
    }
}

impl Error {
    pub(crate) fn at_mode(index: usize, source: Error) -> Error {
        Error::AtMode {
            index,
            source: Box::new(source),
        }
    }
}
