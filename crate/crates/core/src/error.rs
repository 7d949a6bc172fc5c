use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("distribution error: {0}")]
    Distribution(String),
    #[error("path error: {0}")]
    Path(String),
    #[error("coupling error: {0}")]
    Coupling(String),
    #[error("enumeration limit: {0}")]
    TooLarge(String),
    #[error("search budget exhausted: {0}")]
    Budget(String),
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable kind for error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Geometry(_) => "geometry",
            Error::Distribution(_) => "distribution",
            Error::Path(_) => "path",
            Error::Coupling(_) => "coupling",
            Error::TooLarge(_) => "too_large",
            Error::Budget(_) => "budget",
            Error::Snapshot(_) => "snapshot",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
