use std::path::PathBuf;

use crate::xsec::TransitionKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rotational label: {0}")]
    Label(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: expected `# format: {expected} v1`, found {found:?}", path.display())]
    Format {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("no cross section for {0} in either direction")]
    MissingTransition(TransitionKey),

    #[error("reverse of {0} is absent and the policy requires both directions")]
    IncompletePair(TransitionKey),

    #[error("{key}: only {usable} usable cross-section samples above U_min = {u_min} cm-1")]
    InsufficientData {
        key: TransitionKey,
        usable: usize,
        u_min: f64,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("undefined Dalitz point: all three rates are zero")]
    UndefinedPoint,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_) | Error::InsufficientData { .. } | Error::Invariant(_)
        )
    }
}
