use thiserror::Error;

use crate::types::BlockId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot build an MBR from zero tuples")]
    EmptyBlock,

    #[error("table has no rows")]
    EmptyTable,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("hilbert key needs {dims} x {order} bits, more than 64")]
    KeyWidth { dims: usize, order: u32 },

    #[error("cannot form {k} clusters from {rows} rows")]
    TooManyClusters { k: usize, rows: usize },

    #[error("unknown block id {0}")]
    UnknownBlock(BlockId),

    #[error("table has {rows} rows but the tuple baseline is capped at {cap} (raise tuple_baseline_max)")]
    TupleBaselineTooLarge { rows: usize, cap: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
