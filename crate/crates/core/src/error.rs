use thiserror::Error;

/// Errors raised by the synthesis, control and simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sampling distribution for moment-only noise")]
    NoSamplingDistribution,

    #[error("unbounded scale: probability 1 has no finite Chebyshev bound")]
    UnboundedScale,

    #[error("unstable closed loop: spectral radius {0:.6} >= 1")]
    UnstableClosedLoop(f64),

    #[error("Lyapunov solve failed")]
    LyapunovFailed,

    #[error("DARE failed: {0}")]
    DareFailed(String),

    #[error("degenerate input error covariance (zero gain)")]
    DegenerateInputPrs,

    #[error("insufficient generators: {generators} < dimension {dim}")]
    InsufficientGenerators { generators: usize, dim: usize },

    #[error("generator budget exceeded: {0} > 16")]
    GeneratorBudgetExceeded(usize),

    #[error("zonotope not full-dimensional")]
    NotFullDimensional,

    #[error("MPI iteration did not converge after {0} iterations")]
    MpiNotConverged(usize),

    #[error("terminal set empty")]
    TerminalSetEmpty,

    #[error("safety step infeasible")]
    SafetyInfeasible,

    #[error("recursive feasibility violated at step {0}")]
    RecursiveFeasibilityViolated(usize),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    /// The underlying error with any stage labels removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Labels an error with the pipeline stage that produced it.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
