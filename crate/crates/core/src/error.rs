use thiserror::Error;

/// Errors raised by the analytic solvers, the simulator and the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable model: traffic intensity {rho:.6} >= 1")]
    Unstable { rho: f64 },

    #[error("root count mismatch: expected {expected}, companion matrix found {found}, winding number {winding}")]
    RootCountMismatch {
        expected: usize,
        found: usize,
        winding: i64,
    },

    #[error("zero too close to the counting contour (radius {radius})")]
    ContourTooClose { radius: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("{what} = {value} outside [0, 1]")]
    RangeViolation { what: &'static str, value: f64 },

    #[error("no candidate form matches the quadrature reference: {0}")]
    OracleMismatch(String),

    #[error("transform evaluation failed at s = {0}")]
    EvaluationFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("polynomial degree {degree} exceeds cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::Domain(_) | Error::Unstable { .. } | Error::Config(_) | Error::Unsupported(_) => 2,
            _ => 3,
        }
    }
}

/// Attaches a label to an error without changing its exit code.
pub trait Context<T> {
    fn context<S: Into<String>>(self, what: S) -> Result<T>;
}

impl<T> Context<T> for Result<T> {
    fn context<S: Into<String>>(self, what: S) -> Result<T> {
        self.map_err(|e| Error::Context {
            context: what.into(),
            source: Box::new(e),
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
