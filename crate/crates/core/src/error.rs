use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Hilbert space of dimension {dim} needs {bytes} bytes per dense operator, over the {limit}-byte budget")]
    MemoryBudget {
        dim: usize,
        bytes: usize,
        limit: usize,
    },

    #[error("Fock level {level} outside cutoff {cutoff}")]
    OutOfCutoff { level: usize, cutoff: usize },

    #[error("cutoff {cutoff} too small: truncated tail mass {tail:.3e} exceeds {tolerance:.0e}; need cutoff >= {required}")]
    CutoffTooSmall {
        cutoff: usize,
        required: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("state not normalized: |psi|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("singular point: {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("operator not Hermitian: max |M - M^dagger| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("norm drift {drift:.3e} exceeds {limit:.0e}")]
    NormDrift { drift: f64, limit: f64 },

    #[error("trace drift {drift:.3e} exceeds {limit:.0e}")]
    TraceDrift { drift: f64, limit: f64 },

    #[error("density matrix lost positivity: min eigenvalue {min_eigenvalue:.3e}")]
    NegativeEigenvalue { min_eigenvalue: f64 },

    #[error(
        "quadrature did not converge: error estimate {estimate:.3e} over tolerance {tolerance:.0e}"
    )]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("quadratic fit residual {residual:.3e} exceeds {limit:.0e}; error range too wide")]
    FitResidual { residual: f64, limit: f64 },

    #[error("at grid point (gamma = {gamma}, eta = {eta}): {source}")]
    GridPoint {
        gamma: f64,
        eta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config: {0}")]
    ConfigMissing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Config problems map to exit code 1; everything else is numeric (2).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::ConfigMissing(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
