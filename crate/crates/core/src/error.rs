use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    /// Invalid or inconsistent configuration data.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error at x = {x:.6} m: {message}")]
    Numerical { x: f64, message: String },

    #[error("no feasible temperature profile: best yield {best_yield:.6} < required {required:.6}")]
    Infeasible { best_yield: f64, required: f64 },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("solver backend failure ({backend}): {message}; model dumped to {}", dump.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<none>".into()))]
    Solver {
        backend: String,
        message: String,
        dump: Option<PathBuf>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
