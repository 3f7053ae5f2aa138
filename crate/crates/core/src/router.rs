//! Block directory plus the routing structures that own its blocks: the
//! cold KD index, one HBC tree per hot sub-table, or a flat list for the
//! sort-and-chunk baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reorg::HbcTree;
use crate::scheduler::PlacementPlan;
use crate::spatial::KdTree;
use crate::types::{Block, BlockId, Mbr, Query, RowId, Table, Tier};
use crate::util::par_map;

pub const DEFAULT_LEAF_SCAN_THRESHOLD: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatLeaf {
    pub rows: Vec<RowId>,
    pub mbr: Mbr,
    pub block: Option<BlockId>,
    pub placement: Option<Tier>,
}

/// One-level index: every block is a leaf directly under the root.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatIndex {
    pub leaves: Vec<FlatLeaf>,
}

impl FlatIndex {
    /// Cut `order` into consecutive chunks of `block_size` rows.
    pub fn chunked(table: &Table, order: &[RowId], block_size: usize) -> Self {
        let leaves = order
            .chunks(block_size.max(1))
            .map(|c| FlatLeaf {
                rows: c.to_vec(),
                mbr: table.mbr_of_rows(c).expect("chunks are non-empty"),
                block: None,
                placement: None,
            })
            .collect();
        Self { leaves }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RouteTree {
    Kd(KdTree),
    Hbc(HbcTree),
    Flat(FlatIndex),
}

impl RouteTree {
    pub fn leaf_nodes(&self) -> Vec<usize> {
        match self {
            RouteTree::Kd(t) => t.leaf_indices().to_vec(),
            RouteTree::Hbc(t) => t.leaf_indices().to_vec(),
            RouteTree::Flat(f) => (0..f.leaves.len()).collect(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            RouteTree::Kd(t) => t.leaf_count(),
            RouteTree::Hbc(t) => t.leaf_count(),
            RouteTree::Flat(f) => f.leaves.len(),
        }
    }

    pub fn leaf_rows(&self, node: usize) -> &[RowId] {
        match self {
            RouteTree::Kd(t) => &t.leaf(node).rows,
            RouteTree::Hbc(t) => t.leaf_rows(node),
            RouteTree::Flat(f) => &f.leaves[node].rows,
        }
    }

    pub fn leaf_tags(&self, node: usize) -> (Option<BlockId>, Option<Tier>) {
        match self {
            RouteTree::Kd(t) => {
                let l = t.leaf(node);
                (l.block, l.placement)
            }
            RouteTree::Hbc(t) => (t.leaf_block(node), t.leaf_placement(node)),
            RouteTree::Flat(f) => (f.leaves[node].block, f.leaves[node].placement),
        }
    }

    fn set_tags(&mut self, node: usize, block: BlockId, tier: Tier) {
        match self {
            RouteTree::Kd(t) => {
                let l = t.leaf_mut(node);
                l.block = Some(block);
                l.placement = Some(tier);
            }
            RouteTree::Hbc(t) => t.set_leaf_tags(node, Some(block), Some(tier)),
            RouteTree::Flat(f) => {
                f.leaves[node].block = Some(block);
                f.leaves[node].placement = Some(tier);
            }
        }
    }

    /// Leaf nodes reached by pruning top-down on node MBRs.
    fn descend(&self, q: &Query, out: &mut Vec<usize>) {
        match self {
            RouteTree::Kd(t) => t.route_into(q, out),
            RouteTree::Hbc(t) => t.route_into(q, out),
            RouteTree::Flat(f) => out.extend((0..f.leaves.len()).filter(|&i| q.intersects(&f.leaves[i].mbr))),
        }
    }
}

/// Blocks touched by one query and how many of their tuples satisfy it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryTrace {
    pub query: u32,
    /// Ascending block ids.
    pub blocks: Vec<BlockId>,
    pub matches: Vec<u32>,
}

impl QueryTrace {
    pub fn satisfying(&self) -> u64 {
        self.matches.iter().map(|&m| m as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingForest {
    blocks: Vec<Block>,
    trees: Vec<RouteTree>,
    /// block id -> (tree, leaf node)
    locator: Vec<(usize, usize)>,
    /// tree -> (leaf node, block id) in leaf order
    leaf_blocks: Vec<Vec<(usize, BlockId)>>,
}

impl RoutingForest {
    /// Number the leaves of `trees` in order and build the block directory.
    /// Leaves that already carry a placement tag keep it; the rest start in
    /// the cloud.
    pub fn new(table: &Table, mut trees: Vec<RouteTree>) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut locator = Vec::new();
        let mut leaf_blocks = Vec::with_capacity(trees.len());
        for (t, tree) in trees.iter_mut().enumerate() {
            let mut list = Vec::new();
            for node in tree.leaf_nodes() {
                let id = blocks.len() as BlockId;
                let mut b = Block::new(id, table, tree.leaf_rows(node).to_vec())?;
                b.placement = tree.leaf_tags(node).1.unwrap_or(Tier::Cloud);
                tree.set_tags(node, id, b.placement);
                blocks.push(b);
                locator.push((t, node));
                list.push((node, id));
            }
            leaf_blocks.push(list);
        }
        Ok(Self {
            blocks,
            trees,
            locator,
            leaf_blocks,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> Result<&Block> {
        self.blocks.get(id as usize).ok_or(Error::UnknownBlock(id))
    }

    pub fn trees(&self) -> &[RouteTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_rows(&self) -> u64 {
        self.blocks.iter().map(|b| b.size() as u64).sum()
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    /// Blocks whose MBR intersects `q`, ascending by id. Trees with at most
    /// `leaf_scan_threshold` leaves are scanned leaf by leaf; larger ones are
    /// descended from the root.
    pub fn route(&self, q: &Query, leaf_scan_threshold: usize) -> Vec<BlockId> {
        let mut out = Vec::new();
        let mut nodes = Vec::new();
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.leaf_count() <= leaf_scan_threshold {
                for &(_, id) in &self.leaf_blocks[t] {
                    if q.intersects(&self.blocks[id as usize].mbr) {
                        out.push(id);
                    }
                }
            } else {
                nodes.clear();
                tree.descend(q, &mut nodes);
                out.extend(nodes.iter().map(|&n| tree.leaf_tags(n).0.expect("numbered leaf")));
            }
        }
        out.sort_unstable();
        out
    }

    /// Route `q` and count its satisfying tuples per block.
    pub fn trace(&self, table: &Table, q: &Query, leaf_scan_threshold: usize) -> QueryTrace {
        let blocks = self.route(q, leaf_scan_threshold);
        let matches = blocks
            .iter()
            .map(|&id| {
                let b = &self.blocks[id as usize];
                if q.contains_mbr(&b.mbr) {
                    b.size() as u32
                } else {
                    table.count_matching(q, &b.rows) as u32
                }
            })
            .collect();
        QueryTrace {
            query: q.id,
            blocks,
            matches,
        }
    }

    pub fn trace_all(&self, table: &Table, queries: &[Query], leaf_scan_threshold: usize) -> Vec<QueryTrace> {
        par_map(queries, |q| self.trace(table, q, leaf_scan_threshold))
    }

    pub fn placement(&self, id: BlockId) -> Result<Tier> {
        Ok(self.block(id)?.placement)
    }

    /// Returns whether the tag changed.
    pub fn set_placement(&mut self, id: BlockId, tier: Tier) -> Result<bool> {
        let b = self.blocks.get_mut(id as usize).ok_or(Error::UnknownBlock(id))?;
        if b.placement == tier {
            return Ok(false);
        }
        b.placement = tier;
        let (t, node) = self.locator[id as usize];
        self.trees[t].set_tags(node, id, tier);
        Ok(true)
    }

    /// Selected blocks go to the edge, every other block to the cloud.
    /// Returns the number of blocks whose tag changed.
    pub fn apply_placement(&mut self, plan: &PlacementPlan) -> Result<usize> {
        if let Some(&bad) = plan.selected.iter().find(|&&id| id as usize >= self.blocks.len()) {
            return Err(Error::UnknownBlock(bad));
        }
        let mut changed = 0;
        for id in 0..self.blocks.len() as BlockId {
            let tier = if plan.is_selected(id) { Tier::Edge } else { Tier::Cloud };
            changed += self.set_placement(id, tier)? as usize;
        }
        Ok(changed)
    }

    pub fn edge_blocks(&self) -> Vec<BlockId> {
        self.blocks.iter().filter(|b| b.placement == Tier::Edge).map(|b| b.id).collect()
    }

    /// Back to a cold start: zero heat, everything in the cloud.
    pub fn reset(&mut self) {
        for id in 0..self.blocks.len() as BlockId {
            self.set_placement(id, Tier::Cloud).expect("own id");
            let b = &mut self.blocks[id as usize];
            b.heat = 0.0;
            b.hits = 0;
        }
    }

    /// Directory and leaf tags agree and every block sits in one leaf.
    pub fn check_consistency(&self) -> Result<()> {
        let mut seen = vec![false; self.blocks.len()];
        for tree in &self.trees {
            for node in tree.leaf_nodes() {
                let (Some(id), tier) = tree.leaf_tags(node) else {
                    return Err(Error::Manifest("leaf without a block id".into()));
                };
                let b = self.block(id)?;
                if std::mem::replace(&mut seen[id as usize], true) {
                    return Err(Error::Manifest(format!("block {id} in two leaves")));
                }
                if tier != Some(b.placement) || tree.leaf_rows(node) != b.rows.as_slice() {
                    return Err(Error::Manifest(format!("block {id} disagrees with its leaf")));
                }
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return Err(Error::Manifest(format!("block {id} not in any tree")));
        }
        Ok(())
    }
}
