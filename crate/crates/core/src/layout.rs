//! Block generation by method name, producing a routing forest.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::baselines::{curve_blocks, key_order_blocks, kdtree_blocks, tuple_baseline, DEFAULT_TUPLE_BASELINE_MAX};
use crate::error::Result;
use crate::partition::{partition_table_timed, FilterMode, PartitionConfig, PartitionReport};
use crate::reorg::{hbc, HbcConfig};
use crate::router::{RouteTree, RoutingForest};
use crate::types::{Query, Table};
use crate::util::{mix, par_map, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "brame-h")]
    BrameH,
    #[serde(rename = "brame-s")]
    BrameS,
    #[serde(rename = "key-order")]
    KeyOrder,
    #[serde(rename = "kdtree")]
    KdTree,
    #[serde(rename = "curve")]
    Curve,
    #[serde(rename = "tuple")]
    Tuple,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::BrameH,
        Method::BrameS,
        Method::KeyOrder,
        Method::KdTree,
        Method::Curve,
        Method::Tuple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BrameH => "brame-h",
            Method::BrameS => "brame-s",
            Method::KeyOrder => "key-order",
            Method::KdTree => "kdtree",
            Method::Curve => "curve",
            Method::Tuple => "tuple",
        }
    }

    pub fn is_workload_aware(self) -> bool {
        matches!(self, Method::BrameH | Method::BrameS)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected brame-h | brame-s | key-order | kdtree | curve | tuple)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub block_size: usize,
    pub partition: PartitionConfig,
    pub hbc: HbcConfig,
    /// Hilbert order for the curve baseline; derived from `d` when unset.
    pub curve_order: Option<u32>,
    pub tuple_baseline_max: usize,
}

impl LayoutConfig {
    pub fn new(block_size: usize) -> Self {
        Self {
            block_size,
            partition: PartitionConfig::new(block_size),
            hbc: HbcConfig::with_block_size(block_size),
            curve_order: None,
            tuple_baseline_max: DEFAULT_TUPLE_BASELINE_MAX,
        }
    }
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self::new(2048)
    }
}

/// Named build phases with their wall-clock time, in execution order.
pub type Phases = Vec<(&'static str, Duration)>;

#[derive(Debug, Clone)]
pub struct Layout {
    pub method: Method,
    pub forest: RoutingForest,
    pub partition: Option<PartitionReport>,
    pub phases: Phases,
    pub total: Duration,
}

/// Identical boxes add nothing to a workload encoding.
fn distinct_queries(workload: &[Query]) -> Vec<Query> {
    let mut seen = std::collections::HashSet::new();
    workload
        .iter()
        .filter(|q| {
            let key: Vec<(usize, u64, u64)> = q.bounds().iter().map(|b| (b.col, b.lo.to_bits(), b.hi.to_bits())).collect();
            seen.insert(key)
        })
        .cloned()
        .collect()
}

/// Build the blocks for `method`. `workload` is only read by the
/// workload-aware methods.
pub fn build_layout(table: &Table, method: Method, workload: &[Query], cfg: &LayoutConfig, seed: u64) -> Result<Layout> {
    let start = Instant::now();
    let mut phases: Phases = Vec::new();
    let mut partition = None;
    let trees = match method {
        Method::KeyOrder => vec![RouteTree::Flat(key_order_blocks(table, cfg.block_size))],
        Method::KdTree => vec![RouteTree::Kd(kdtree_blocks(table, cfg.block_size))],
        Method::Curve => vec![RouteTree::Flat(curve_blocks(table, cfg.block_size, cfg.curve_order)?)],
        Method::Tuple => vec![RouteTree::Flat(tuple_baseline(table, cfg.tuple_baseline_max)?)],
        Method::BrameH | Method::BrameS => {
            let workload = distinct_queries(workload);
            let pcfg = PartitionConfig {
                filter: if method == Method::BrameH { FilterMode::Hard } else { FilterMode::Soft },
                block_size: cfg.block_size,
                ..cfg.partition
            };
            let (out, times) = partition_table_timed(table, &workload, &pcfg, seed)?;
            phases.push(("presegment", times.presegment));
            phases.push(("page_encode", times.encode));
            phases.push(("filter_cluster", times.filter_and_cluster));
            phases.push(("cold_reorg", times.cold));

            let clock = Instant::now();
            let hcfg = HbcConfig {
                block_size: cfg.block_size,
                ..cfg.hbc
            };
            let jobs: Vec<(usize, &Vec<u32>)> = out.hot.iter().enumerate().collect();
            let hot = par_map(&jobs, |&(i, rows)| {
                let mut tree = hbc(table, rows, &workload, &hcfg, mix(seed, 100 + i as u64));
                tree.subtable = i;
                RouteTree::Hbc(tree)
            });
            phases.push(("hbc", clock.elapsed()));
            partition = Some(out.report);
            let mut trees = vec![RouteTree::Kd(out.cold)];
            trees.extend(hot);
            trees
        }
    };
    let clock = Instant::now();
    let forest = RoutingForest::new(table, trees)?;
    phases.push(("directory", clock.elapsed()));
    Ok(Layout {
        method,
        forest,
        partition,
        phases,
        total: start.elapsed(),
    })
}
