use serde::{Deserialize, Serialize};

use crate::types::{BlockId, Mbr, Query, RowId, Table, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// Split on the dimension with the largest variance.
    MaxVarianceMedian,
    /// Cycle through dimensions by depth.
    RoundRobinMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop once a node holds fewer than `2 * capacity` rows (page
    /// pre-segmentation); leaves hold up to `2 * capacity - 1` rows.
    UnderTwiceCapacity,
    /// Stop once a node holds at most `capacity` rows (block building).
    AtMostCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KdConfig {
    pub capacity: usize,
    pub split: SplitRule,
    pub stop: StopRule,
}

impl KdConfig {
    pub fn pages(capacity: usize) -> Self {
        Self {
            capacity,
            split: SplitRule::MaxVarianceMedian,
            stop: StopRule::UnderTwiceCapacity,
        }
    }

    pub fn blocks(capacity: usize, split: SplitRule) -> Self {
        Self {
            capacity,
            split,
            stop: StopRule::AtMostCapacity,
        }
    }

    fn is_leaf(&self, n: usize) -> bool {
        let cap = self.capacity.max(1);
        match self.stop {
            StopRule::UnderTwiceCapacity => n < 2 * cap,
            StopRule::AtMostCapacity => n <= cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdLeaf {
    pub rows: Vec<RowId>,
    pub mbr: Mbr,
    pub block: Option<BlockId>,
    pub placement: Option<Tier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KdNode {
    Split {
        dim: usize,
        value: f64,
        mbr: Mbr,
        left: usize,
        right: usize,
    },
    Leaf(KdLeaf),
}

impl KdNode {
    pub fn mbr(&self) -> &Mbr {
        match self {
            KdNode::Split { mbr, .. } => mbr,
            KdNode::Leaf(l) => &l.mbr,
        }
    }
}

/// Median-split K-D tree stored as an arena. Rows on the left of a split
/// have `value <= split`, rows on the right `value >= split`; equal values
/// are ordered by row id so builds are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdTree {
    nodes: Vec<KdNode>,
    root: Option<usize>,
    leaves: Vec<usize>,
}

impl KdTree {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            root: None,
            leaves: Vec::new(),
        }
    }

    pub fn build(table: &Table, rows: &[RowId], cfg: KdConfig) -> Self {
        let mut tree = Self::empty();
        if rows.is_empty() {
            return tree;
        }
        let mut work = rows.to_vec();
        let root = tree.build_node(table, &mut work, 0, cfg);
        tree.root = Some(root);
        tree.leaves = (0..tree.nodes.len())
            .filter(|&i| matches!(tree.nodes[i], KdNode::Leaf(_)))
            .collect();
        tree
    }

    fn build_node(&mut self, table: &Table, rows: &mut [RowId], depth: usize, cfg: KdConfig) -> usize {
        let mbr = table.mbr_of_rows(rows).expect("non-empty node");
        if cfg.is_leaf(rows.len()) {
            let mut ids = rows.to_vec();
            ids.sort_unstable();
            self.nodes.push(KdNode::Leaf(KdLeaf {
                rows: ids,
                mbr,
                block: None,
                placement: None,
            }));
            return self.nodes.len() - 1;
        }
        let dim = match cfg.split {
            SplitRule::RoundRobinMedian => depth % table.dims(),
            SplitRule::MaxVarianceMedian => max_variance_dim(table, rows),
        };
        let mid = rows.len() / 2;
        rows.select_nth_unstable_by(mid, |&a, &b| {
            table.row(a)[dim]
                .total_cmp(&table.row(b)[dim])
                .then(a.cmp(&b))
        });
        let value = rows[..mid]
            .iter()
            .map(|&r| table.row(r)[dim])
            .fold(f64::NEG_INFINITY, f64::max);
        // reserve the slot so the parent precedes its children
        let idx = self.nodes.len();
        self.nodes.push(KdNode::Leaf(KdLeaf {
            rows: Vec::new(),
            mbr: mbr.clone(),
            block: None,
            placement: None,
        }));
        let (l, r) = rows.split_at_mut(mid);
        let left = self.build_node(table, l, depth + 1, cfg);
        let right = self.build_node(table, r, depth + 1, cfg);
        self.nodes[idx] = KdNode::Split {
            dim,
            value,
            mbr,
            left,
            right,
        };
        idx
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn nodes(&self) -> &[KdNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &KdNode {
        &self.nodes[idx]
    }

    /// Leaf node indices in construction (left-to-right) order.
    pub fn leaf_indices(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf(&self, idx: usize) -> &KdLeaf {
        match &self.nodes[idx] {
            KdNode::Leaf(l) => l,
            KdNode::Split { .. } => panic!("node {idx} is not a leaf"),
        }
    }

    pub fn leaf_mut(&mut self, idx: usize) -> &mut KdLeaf {
        match &mut self.nodes[idx] {
            KdNode::Leaf(l) => l,
            KdNode::Split { .. } => panic!("node {idx} is not a leaf"),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &KdLeaf> {
        self.leaves.iter().map(|&i| self.leaf(i))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Leaf indices whose MBR intersects `q`, descending with MBR pruning.
    pub fn route(&self, q: &Query) -> Vec<usize> {
        let mut out = Vec::new();
        self.route_into(q, &mut out);
        out
    }

    pub fn route_into(&self, q: &Query, out: &mut Vec<usize>) {
        let Some(root) = self.root else { return };
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !q.intersects(node.mbr()) {
                continue;
            }
            match node {
                KdNode::Leaf(_) => out.push(i),
                KdNode::Split { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
    }

    pub(crate) fn from_parts(nodes: Vec<KdNode>, root: Option<usize>) -> Self {
        let leaves = (0..nodes.len())
            .filter(|&i| matches!(nodes[i], KdNode::Leaf(_)))
            .collect();
        Self { nodes, root, leaves }
    }
}

fn max_variance_dim(table: &Table, rows: &[RowId]) -> usize {
    let d = table.dims();
    let n = rows.len() as f64;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for &r in rows {
        for (k, &v) in table.row(r).iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
        }
    }
    let mut best = 0;
    let mut best_var = f64::NEG_INFINITY;
    for k in 0..d {
        let mean = sum[k] / n;
        let var = sq[k] / n - mean * mean;
        if var > best_var {
            best_var = var;
            best = k;
        }
    }
    best
}

/// Pre-segmentation build: median splits until every leaf holds fewer
/// than `2 * capacity` rows.
pub fn kdtree_build(table: &Table, rows: &[RowId], capacity: usize, split: SplitRule) -> KdTree {
    KdTree::build(
        table,
        rows,
        KdConfig {
            capacity,
            split,
            stop: StopRule::UnderTwiceCapacity,
        },
    )
}

pub fn kdtree_route(tree: &KdTree, q: &Query) -> Vec<usize> {
    tree.route(q)
}
