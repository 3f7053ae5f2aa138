//! Workload-aware data reorganization: tuple bitmap encoding, balanced
//! k-means, and the hierarchical balanced clustering (HBC) tree.

mod encode;
mod hbc;
mod kmeans;

pub use encode::{encode_tuples, FeatureMatrix};
pub use hbc::{dynamic_adjust_k, hbc, initial_placement, HbcConfig, HbcNode, HbcNodeKind, HbcTree};
pub use kmeans::{balanced_kmeans, balanced_kmeans_subset, detect_skew, BalancedKMeansResult};
