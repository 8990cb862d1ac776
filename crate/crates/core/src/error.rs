use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: String,
        got: String,
    },

    #[error("{what} at t={t} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { what: String, t: usize, asymmetry: f64 },

    #[error("{what} at t={t} must be positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite {
        what: String,
        t: usize,
        min_eigenvalue: f64,
    },

    #[error("{what} at t={t} must be positive semi-definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemiDefinite {
        what: String,
        t: usize,
        min_eigenvalue: f64,
    },

    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),

    #[error("attenuation condition fails at t={t} for gamma={gamma} (margin {margin:.3e})")]
    Infeasible { gamma: f64, t: usize, margin: f64 },

    #[error("no feasibility bracket: gamma={lo} feasible={lo_feasible}, gamma={hi} feasible={hi_feasible}")]
    NoBracket {
        lo: f64,
        hi: f64,
        lo_feasible: bool,
        hi_feasible: bool,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("stacked oracle limited to n <= {max} followers, got {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("record {run} lacks the data needed to evaluate the cost")]
    InsufficientData { run: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
