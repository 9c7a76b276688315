use std::path::PathBuf;

/// Errors produced by the optimization library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("stiffness matrix is singular or indefinite: {deficient_dofs} deficient dof(s)")]
    SingularStiffness { deficient_dofs: usize },

    #[error("non-finite gradient at variable {index}")]
    NonFiniteGradient { index: usize },

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("field file {path}: {message}")]
    FieldFormat { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
