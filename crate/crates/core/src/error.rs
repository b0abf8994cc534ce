use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("node at ({x}, {y}) cannot reach any grid node")]
    UnreachableNode { x: f64, y: f64 },

    #[error("floyd requested on {nodes} nodes (cap {cap}); use dijkstra for graphs this size")]
    GraphTooLarge { nodes: usize, cap: usize },

    #[error("rank-deficient design; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("drop-step reached the minimum of {k_min} knots without resolving the variance check")]
    DropStepFailed { k_min: usize },

    #[error("non-finite covariate '{name}' at rows {rows:?}")]
    NonFiniteCovariate { name: String, rows: Vec<usize> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::RankDeficient { .. } | Error::Numerical(_) | Error::DropStepFailed { .. }
        )
    }
}
