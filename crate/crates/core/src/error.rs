use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Configuration,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("singular design: {0}")]
    Singular(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("observation error: {0}")]
    Observation(String),

    #[error("undefined contrast: {0}")]
    UndefinedContrast(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Graph(_) | Error::UndefinedContrast(_) => {
                ErrorClass::Configuration
            }
            Error::Singular(_) | Error::Degenerate(_) => ErrorClass::Numerical,
            Error::Schema(_)
            | Error::Ingestion(_)
            | Error::Region(_)
            | Error::Window(_)
            | Error::Lookup(_)
            | Error::Data(_)
            | Error::Normalization(_)
            | Error::Observation(_)
            | Error::Io { .. } => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
