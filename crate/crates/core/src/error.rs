use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid {entity}: {message}")]
    Semantic { entity: String, message: String },

    #[error("branch {from}-{to} has zero impedance")]
    SingularBranch { from: usize, to: usize },

    #[error("zero voltage magnitude at bus {bus}")]
    ZeroVoltage { bus: usize },

    #[error(
        "power flow did not converge after {iterations} iterations \
         (mismatch {mismatch:.3e} pu, worst bus {worst_bus})"
    )]
    PowerFlowDiverged {
        iterations: usize,
        mismatch: f64,
        worst_bus: usize,
        trace: Vec<f64>,
    },

    #[error("singular power-flow Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("algebraic block is singular or ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("eigenvalue iteration did not converge within {iterations} sweeps")]
    EigenNoConvergence { iterations: usize },

    #[error("eigenvalue {index} is defective or clustered; first-order sensitivity undefined")]
    DefectiveEigenvalue { index: usize },

    #[error("invalid specification string `{input}`: {message}")]
    InvalidSpec { input: String, message: String },

    #[error("case has no load labeled {0}")]
    MissingLoad(String),

    #[error("synthesis found no destabilizing attack (best spectral abscissa {best_abscissa:.4})")]
    Infeasible { best_abscissa: f64 },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn semantic(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic {
            entity: entity.into(),
            message: message.into(),
        }
    }
}

impl Error {
    /// Wraps `self` with a note on what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, past any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
