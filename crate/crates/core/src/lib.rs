//! Workload-aware block generation and hot/cold tiering across cloud, edge
//! and end devices.

pub mod baselines;
pub mod cache;
pub mod config;
pub mod error;
pub mod ingest;
pub mod layout;
pub mod manifest;
pub mod partition;
pub mod reorg;
pub mod router;
pub mod scheduler;
pub mod sim;
pub mod spatial;
pub mod types;
pub mod workload;

mod util;

pub use error::{Error, Result};
pub use types::{Block, BlockId, Bound, ColumnKind, Mbr, Query, RowId, Schema, Table, Tier};
