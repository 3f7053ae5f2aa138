//! Spatial structures shared by partitioning, cold-data indexing, the
//! reorganization fallback and the data-aware baselines.

mod hilbert;
mod kdtree;

pub use hilbert::{default_order, hilbert_index, hilbert_key_of_point, HilbertKey};
pub use kdtree::{kdtree_build, kdtree_route, KdConfig, KdLeaf, KdNode, KdTree, SplitRule, StopRule};
