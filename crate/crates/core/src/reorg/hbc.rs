use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{balanced_kmeans_subset, detect_skew, encode_tuples, FeatureMatrix};
use crate::scheduler::{solve_knapsack, KnapsackInstance, KnapsackItem, PlacementPlan, Solver};
use crate::spatial::{KdConfig, KdNode, KdTree, SplitRule};
use crate::types::{sort_lexicographic, BlockId, Mbr, Query, RowId, Table, Tier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbcConfig {
    pub block_size: usize,
    /// Balance penalty weight. Zero by default: workload encodings are
    /// sparse, and any penalty large enough to matter splits groups of
    /// identical encodings at random, which wrecks block MBRs.
    pub phi: f64,
    /// Divide `phi` by the target cluster size `n / k` at each node, so the
    /// balance term stays on the scale of the bit distances however large
    /// the node is. Off means `phi` is passed through unchanged.
    pub scale_phi: bool,
    pub max_iters: usize,
    pub fanout_target: usize,
    pub k_max: usize,
    /// Skew threshold: a node whose most common encoding covers more than
    /// this fraction falls back to a K-D split.
    pub tau: f64,
}

impl Default for HbcConfig {
    fn default() -> Self {
        Self {
            block_size: 2048,
            phi: 0.0,
            scale_phi: true,
            max_iters: 25,
            fanout_target: 8,
            k_max: 16,
            tau: 0.9,
        }
    }
}

impl HbcConfig {
    pub fn with_block_size(block_size: usize) -> Self {
        Self {
            block_size,
            ..Self::default()
        }
    }
}

/// `clamp(ceil(size / (fanout_target * block_size)), 2, k_max)`.
pub fn dynamic_adjust_k(node_size: usize, cfg: &HbcConfig) -> usize {
    let per_child = (cfg.fanout_target * cfg.block_size).max(1);
    node_size.div_ceil(per_child).clamp(2, cfg.k_max.max(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HbcNodeKind {
    Cluster {
        children: Vec<usize>,
    },
    /// K-D fallback split used when a node's encodings are skewed.
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        rows: Vec<RowId>,
        block: Option<BlockId>,
        placement: Option<Tier>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbcNode {
    pub mbr: Mbr,
    pub kind: HbcNodeKind,
}

impl HbcNode {
    pub fn children(&self) -> Vec<usize> {
        match &self.kind {
            HbcNodeKind::Cluster { children } => children.clone(),
            HbcNodeKind::Split { left, right, .. } => vec![*left, *right],
            HbcNodeKind::Leaf { .. } => Vec::new(),
        }
    }
}

/// Hierarchical clustering tree of one hot sub-table. Internal nodes carry
/// the Max-Min index of their members; leaves are blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbcTree {
    pub subtable: usize,
    nodes: Vec<HbcNode>,
    root: Option<usize>,
    leaves: Vec<usize>,
}

impl HbcTree {
    pub(crate) fn from_parts(subtable: usize, nodes: Vec<HbcNode>, root: Option<usize>) -> Self {
        let leaves = leaf_order(&nodes, root);
        Self {
            subtable,
            nodes,
            root,
            leaves,
        }
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn nodes(&self) -> &[HbcNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &HbcNode {
        &self.nodes[i]
    }

    pub fn leaf_indices(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_rows(&self, i: usize) -> &[RowId] {
        match &self.nodes[i].kind {
            HbcNodeKind::Leaf { rows, .. } => rows,
            _ => panic!("node {i} is not a leaf"),
        }
    }

    pub fn leaf_block(&self, i: usize) -> Option<BlockId> {
        match &self.nodes[i].kind {
            HbcNodeKind::Leaf { block, .. } => *block,
            _ => None,
        }
    }

    pub fn leaf_placement(&self, i: usize) -> Option<Tier> {
        match &self.nodes[i].kind {
            HbcNodeKind::Leaf { placement, .. } => *placement,
            _ => None,
        }
    }

    pub fn set_leaf_tags(&mut self, i: usize, block_id: Option<BlockId>, tier: Option<Tier>) {
        if let HbcNodeKind::Leaf { block, placement, .. } = &mut self.nodes[i].kind {
            if block_id.is_some() {
                *block = block_id;
            }
            if tier.is_some() {
                *placement = tier;
            }
        }
    }

    /// Leaf indices whose MBR intersects `q`.
    pub fn route_into(&self, q: &Query, out: &mut Vec<usize>) {
        let Some(root) = self.root else { return };
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !q.intersects(&node.mbr) {
                continue;
            }
            match &node.kind {
                HbcNodeKind::Leaf { .. } => out.push(i),
                HbcNodeKind::Cluster { children } => stack.extend(children.iter().rev()),
                HbcNodeKind::Split { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
    }
}

fn leaf_order(nodes: &[HbcNode], root: Option<usize>) -> Vec<usize> {
    let mut out = Vec::new();
    let Some(root) = root else { return out };
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        match &nodes[i].kind {
            HbcNodeKind::Leaf { .. } => out.push(i),
            HbcNodeKind::Cluster { children } => stack.extend(children.iter().rev()),
            HbcNodeKind::Split { left, right, .. } => {
                stack.push(*right);
                stack.push(*left);
            }
        }
    }
    out
}

fn leaf_node(table: &Table, mut rows: Vec<RowId>) -> HbcNode {
    let mbr = table.mbr_of_rows(&rows).expect("non-empty leaf");
    sort_lexicographic(table, &mut rows);
    HbcNode {
        mbr,
        kind: HbcNodeKind::Leaf {
            rows,
            block: None,
            placement: None,
        },
    }
}

fn seed_for(seed: u64, node: usize) -> u64 {
    seed ^ (node as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

/// Copy a K-D tree built over a node's rows into `nodes`, placing its root
/// at `at`.
fn graft_kdtree(table: &Table, nodes: &mut Vec<HbcNode>, at: usize, kd: &KdTree) {
    fn copy(table: &Table, nodes: &mut Vec<HbcNode>, kd: &KdTree, src: usize, dst: usize) {
        match kd.node(src) {
            KdNode::Leaf(l) => nodes[dst] = leaf_node(table, l.rows.clone()),
            KdNode::Split {
                dim,
                value,
                mbr,
                left,
                right,
            } => {
                let l = nodes.len();
                nodes.push(placeholder(mbr));
                let r = nodes.len();
                nodes.push(placeholder(mbr));
                nodes[dst] = HbcNode {
                    mbr: mbr.clone(),
                    kind: HbcNodeKind::Split {
                        dim: *dim,
                        value: *value,
                        left: l,
                        right: r,
                    },
                };
                copy(table, nodes, kd, *left, l);
                copy(table, nodes, kd, *right, r);
            }
        }
    }
    if let Some(root) = kd.root() {
        copy(table, nodes, kd, root, at);
    }
}

fn placeholder(mbr: &Mbr) -> HbcNode {
    HbcNode {
        mbr: mbr.clone(),
        kind: HbcNodeKind::Cluster { children: Vec::new() },
    }
}

/// Top-down hierarchical balanced clustering of `rows` into blocks of at
/// most `cfg.block_size` rows.
///
/// Nodes are processed FIFO. Each oversized node is split by balanced
/// k-means over the workload encoding with a size-dependent `k`; when the
/// node's encodings are skewed it is instead split by a K-D tree straight
/// down to block-sized leaves.
pub fn hbc(table: &Table, rows: &[RowId], workload: &[Query], cfg: &HbcConfig, seed: u64) -> HbcTree {
    let block = cfg.block_size.max(1);
    if rows.is_empty() {
        return HbcTree::from_parts(0, Vec::new(), None);
    }
    if rows.len() <= block {
        return HbcTree::from_parts(0, vec![leaf_node(table, rows.to_vec())], Some(0));
    }
    let x: FeatureMatrix = encode_tuples(table, rows, workload);
    let mut nodes = vec![placeholder(&table.mbr_of_rows(rows).expect("non-empty"))];
    let mut queue: VecDeque<(usize, Vec<usize>)> = VecDeque::new();
    queue.push_back((0, (0..rows.len()).collect()));

    while let Some((idx, members)) = queue.pop_front() {
        let k = dynamic_adjust_k(members.len(), cfg).min(members.len());
        if detect_skew(&x, &members, k, cfg.tau) {
            let ids: Vec<RowId> = members.iter().map(|&m| rows[m]).collect();
            let kd = KdTree::build(table, &ids, KdConfig::blocks(block, SplitRule::MaxVarianceMedian));
            graft_kdtree(table, &mut nodes, idx, &kd);
            continue;
        }
        let phi = if cfg.scale_phi {
            cfg.phi * k as f64 / members.len() as f64
        } else {
            cfg.phi
        };
        let res = balanced_kmeans_subset(&x, &members, k, phi, cfg.max_iters, seed_for(seed, idx))
            .expect("k <= node size");
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (&m, &c) in members.iter().zip(&res.assignment) {
            groups[c].push(m);
        }
        let mut children = Vec::with_capacity(k);
        for g in groups.into_iter().filter(|g| !g.is_empty()) {
            let ids: Vec<RowId> = g.iter().map(|&m| rows[m]).collect();
            let child = nodes.len();
            if ids.len() <= block {
                nodes.push(leaf_node(table, ids));
            } else {
                nodes.push(placeholder(&table.mbr_of_rows(&ids).expect("non-empty")));
                queue.push_back((child, g));
            }
            children.push(child);
        }
        nodes[idx].kind = HbcNodeKind::Cluster { children };
    }
    HbcTree::from_parts(0, nodes, Some(0))
}

/// Seed heat per leaf with the number of workload queries touching its
/// MBR, then place the best leaves on the edge within `budget` tuples.
/// Leaves without a block id are numbered by leaf order.
pub fn initial_placement(tree: &mut HbcTree, workload: &[Query], budget: u64, solver: Solver) -> PlacementPlan {
    let leaves = tree.leaf_indices().to_vec();
    let items: Vec<KnapsackItem> = leaves
        .iter()
        .enumerate()
        .map(|(ord, &i)| {
            let node = tree.node(i);
            let heat = workload.iter().filter(|q| q.intersects(&node.mbr)).count() as f64;
            KnapsackItem {
                id: tree.leaf_block(i).unwrap_or(ord as BlockId),
                size: tree.leaf_rows(i).len() as u64,
                value: heat,
            }
        })
        .collect();
    let plan = solve_knapsack(&KnapsackInstance::new(budget, items.clone()), solver);
    for (&i, item) in leaves.iter().zip(&items) {
        let tier = if plan.is_selected(item.id) { Tier::Edge } else { Tier::Cloud };
        tree.set_leaf_tags(i, Some(item.id), Some(tier));
    }
    plan
}
