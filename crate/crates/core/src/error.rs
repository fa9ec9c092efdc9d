use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: `{field}` must satisfy {bound} (got {value})")]
    Validation {
        field: &'static str,
        bound: &'static str,
        value: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver did not converge: {message} (last residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("threshold extraction failed: {0}")]
    Extraction(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unstable time step: {0}")]
    Stability(String),

    #[error("transient diverged at t = {t:e} s on node `{node}`")]
    Divergence { t: f64, node: String },

    #[error("no oscillation detected: {0}")]
    Stagnation(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Validation { .. } | Error::Domain(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}
