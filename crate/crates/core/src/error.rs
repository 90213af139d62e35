use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (max residual {residual:.3e}): {detail}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        detail: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Target not reachable; `frontier` is the closest attained (power, eta) when known.
    #[error("infeasible target: {reason}")]
    Infeasible {
        reason: String,
        frontier: Option<(f64, f64)>,
    },

    #[error("enumeration guard exceeded: {0}")]
    Guard(String),

    #[error("no bracket found: {0}")]
    Bracket(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Toml(_))
    }

    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Bracket(_) | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
