//! Layout manifest: the routing trees of a layout as nested JSON.
//!
//! ```text
//! {
//!   "format": "tierblock-manifest", "version": 1,
//!   "method": "brame-s", "block_size": 2048, "rows": 200000, "dims": 3,
//!   "trees": [ { "kind": "kd" | "hbc" | "flat", ... } ],
//!   "provenance": { ... }   (optional)
//! }
//! ```
//!
//! * `kd` and `hbc` trees carry an optional `root` node; `hbc` also has a
//!   `subtable` index. `flat` trees carry a `leaves` list.
//! * Every node has `node` (`split`, `cluster` or `leaf`) and `mbr`
//!   (`{"min": [..], "max": [..]}`).
//! * `split`: `dim`, `value`, `left`, `right`. Rows on the left have
//!   `value <= split value`.
//! * `cluster`: `children`, a list of nodes (HBC only).
//! * `leaf`: `block` id, `placement` (`cloud`, `edge`, `end`), `heat`, and
//!   `rows`, the row ids in storage order.
//!
//! Block ids count leaves depth-first, left to right, across the trees in
//! order. Loading checks the ids, that each leaf MBR encloses its rows,
//! that each node MBR encloses its children, and that every table row sits
//! in exactly one leaf.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::Provenance;
use crate::error::{Error, Result};
use crate::layout::Method;
use crate::reorg::{HbcNode, HbcNodeKind, HbcTree};
use crate::router::{FlatIndex, FlatLeaf, RouteTree, RoutingForest};
use crate::spatial::{KdLeaf, KdNode, KdTree};
use crate::types::{BlockId, Mbr, RowId, Table, Tier};

pub const FORMAT: &str = "tierblock-manifest";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum ManifestNode {
    Split {
        mbr: Mbr,
        dim: usize,
        value: f64,
        left: Box<ManifestNode>,
        right: Box<ManifestNode>,
    },
    Cluster {
        mbr: Mbr,
        children: Vec<ManifestNode>,
    },
    Leaf {
        mbr: Mbr,
        block: BlockId,
        placement: Tier,
        heat: f64,
        rows: Vec<RowId>,
    },
}

impl ManifestNode {
    fn mbr(&self) -> &Mbr {
        match self {
            ManifestNode::Split { mbr, .. } | ManifestNode::Cluster { mbr, .. } | ManifestNode::Leaf { mbr, .. } => mbr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifestTree {
    Kd { root: Option<ManifestNode> },
    Hbc { subtable: usize, root: Option<ManifestNode> },
    Flat { leaves: Vec<ManifestNode> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub method: Option<Method>,
    pub block_size: usize,
    pub rows: u64,
    pub dims: usize,
    pub trees: Vec<ManifestTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn leaf_of(forest: &RoutingForest, block: Option<BlockId>, mbr: &Mbr) -> Result<ManifestNode> {
    let id = block.ok_or_else(|| Error::Manifest("leaf without a block id".into()))?;
    let b = forest.block(id)?;
    Ok(ManifestNode::Leaf {
        mbr: mbr.clone(),
        block: id,
        placement: b.placement,
        heat: b.heat,
        rows: b.rows.clone(),
    })
}

fn kd_node(forest: &RoutingForest, t: &KdTree, i: usize) -> Result<ManifestNode> {
    Ok(match t.node(i) {
        KdNode::Leaf(l) => leaf_of(forest, l.block, &l.mbr)?,
        KdNode::Split {
            dim,
            value,
            mbr,
            left,
            right,
        } => ManifestNode::Split {
            mbr: mbr.clone(),
            dim: *dim,
            value: *value,
            left: Box::new(kd_node(forest, t, *left)?),
            right: Box::new(kd_node(forest, t, *right)?),
        },
    })
}

fn hbc_node(forest: &RoutingForest, t: &HbcTree, i: usize) -> Result<ManifestNode> {
    let n = t.node(i);
    Ok(match &n.kind {
        HbcNodeKind::Leaf { block, .. } => leaf_of(forest, *block, &n.mbr)?,
        HbcNodeKind::Split {
            dim,
            value,
            left,
            right,
        } => ManifestNode::Split {
            mbr: n.mbr.clone(),
            dim: *dim,
            value: *value,
            left: Box::new(hbc_node(forest, t, *left)?),
            right: Box::new(hbc_node(forest, t, *right)?),
        },
        HbcNodeKind::Cluster { children } => ManifestNode::Cluster {
            mbr: n.mbr.clone(),
            children: children.iter().map(|&c| hbc_node(forest, t, c)).collect::<Result<_>>()?,
        },
    })
}

impl Manifest {
    pub fn from_forest(forest: &RoutingForest, method: Option<Method>, block_size: usize, dims: usize) -> Result<Self> {
        let trees = forest
            .trees()
            .iter()
            .map(|tree| {
                Ok(match tree {
                    RouteTree::Kd(t) => ManifestTree::Kd {
                        root: t.root().map(|r| kd_node(forest, t, r)).transpose()?,
                    },
                    RouteTree::Hbc(t) => ManifestTree::Hbc {
                        subtable: t.subtable,
                        root: t.root().map(|r| hbc_node(forest, t, r)).transpose()?,
                    },
                    RouteTree::Flat(f) => ManifestTree::Flat {
                        leaves: f
                            .leaves
                            .iter()
                            .map(|l| leaf_of(forest, l.block, &l.mbr))
                            .collect::<Result<_>>()?,
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            format: FORMAT.into(),
            version: VERSION,
            method,
            block_size,
            rows: forest.total_rows(),
            dims,
            trees,
            provenance: None,
        })
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(input))?)
    }

    /// Rebuild the routing forest over `table`, validating as documented
    /// at the top of this module.
    pub fn into_forest(self, table: &Table) -> Result<RoutingForest> {
        if self.format != FORMAT {
            return Err(Error::Manifest(format!("unknown format `{}`", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Manifest(format!("unsupported version {}", self.version)));
        }
        if self.dims != table.dims() || self.rows != table.len() as u64 {
            return Err(Error::Manifest(format!(
                "manifest is for {} rows x {} columns, table has {} x {}",
                self.rows,
                self.dims,
                table.len(),
                table.dims()
            )));
        }
        let mut v = Validator {
            table,
            seen: vec![false; table.len()],
            next_block: 0,
            heat: Vec::new(),
        };
        let mut trees = Vec::with_capacity(self.trees.len());
        for t in self.trees {
            trees.push(match t {
                ManifestTree::Kd { root } => {
                    let mut nodes = Vec::new();
                    let root = root.map(|r| v.kd(&r, &mut nodes)).transpose()?;
                    RouteTree::Kd(KdTree::from_parts(nodes, root))
                }
                ManifestTree::Hbc { subtable, root } => {
                    let mut nodes = Vec::new();
                    let root = root.map(|r| v.hbc(&r, &mut nodes)).transpose()?;
                    RouteTree::Hbc(HbcTree::from_parts(subtable, nodes, root))
                }
                ManifestTree::Flat { leaves } => {
                    let leaves = leaves
                        .iter()
                        .map(|n| {
                            let (mbr, block, placement, rows) = v.leaf(n)?;
                            Ok(FlatLeaf {
                                rows,
                                mbr,
                                block: Some(block),
                                placement: Some(placement),
                            })
                        })
                        .collect::<Result<_>>()?;
                    RouteTree::Flat(FlatIndex { leaves })
                }
            });
        }
        if let Some(r) = v.seen.iter().position(|s| !s) {
            return Err(Error::Manifest(format!("row {r} is in no leaf")));
        }
        let mut forest = RoutingForest::new(table, trees)?;
        for (b, h) in forest.blocks_mut().iter_mut().zip(&v.heat) {
            b.heat = *h;
        }
        forest.check_consistency()?;
        Ok(forest)
    }
}

struct Validator<'a> {
    table: &'a Table,
    seen: Vec<bool>,
    next_block: BlockId,
    heat: Vec<f64>,
}

impl Validator<'_> {
    fn leaf(&mut self, n: &ManifestNode) -> Result<(Mbr, BlockId, Tier, Vec<RowId>)> {
        let ManifestNode::Leaf {
            mbr,
            block,
            placement,
            heat,
            rows,
        } = n
        else {
            return Err(Error::Manifest("flat trees hold leaves only".into()));
        };
        if *block != self.next_block {
            return Err(Error::Manifest(format!(
                "leaf has block id {block}, expected {} in leaf order",
                self.next_block
            )));
        }
        if rows.is_empty() {
            return Err(Error::Manifest(format!("block {block} is empty")));
        }
        if !heat.is_finite() || *heat < 0.0 {
            return Err(Error::Manifest(format!("block {block} has heat {heat}")));
        }
        for &r in rows {
            let slot = self
                .seen
                .get_mut(r as usize)
                .ok_or_else(|| Error::Manifest(format!("block {block} names row {r}, past the table end")))?;
            if std::mem::replace(slot, true) {
                return Err(Error::Manifest(format!("row {r} appears twice")));
            }
        }
        if !mbr.encloses(&self.table.mbr_of_rows(rows)?) {
            return Err(Error::Manifest(format!("block {block}: MBR does not enclose its rows")));
        }
        self.next_block += 1;
        self.heat.push(*heat);
        Ok((mbr.clone(), *block, *placement, rows.clone()))
    }

    fn check_child(&self, parent: &Mbr, child: &ManifestNode) -> Result<()> {
        if parent.encloses(child.mbr()) {
            Ok(())
        } else {
            Err(Error::Manifest("node MBR does not enclose a child".into()))
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim < self.table.dims() {
            Ok(())
        } else {
            Err(Error::Manifest(format!("split on column {dim}, table has {}", self.table.dims())))
        }
    }

    /// Push `n` in preorder and return its arena index.
    fn kd(&mut self, n: &ManifestNode, nodes: &mut Vec<KdNode>) -> Result<usize> {
        let idx = nodes.len();
        match n {
            ManifestNode::Leaf { .. } => {
                let (mbr, block, placement, rows) = self.leaf(n)?;
                nodes.push(KdNode::Leaf(KdLeaf {
                    rows,
                    mbr,
                    block: Some(block),
                    placement: Some(placement),
                }));
            }
            ManifestNode::Split {
                mbr,
                dim,
                value,
                left,
                right,
            } => {
                self.check_dim(*dim)?;
                self.check_child(mbr, left)?;
                self.check_child(mbr, right)?;
                nodes.push(KdNode::Leaf(KdLeaf {
                    rows: Vec::new(),
                    mbr: mbr.clone(),
                    block: None,
                    placement: None,
                }));
                let l = self.kd(left, nodes)?;
                let r = self.kd(right, nodes)?;
                nodes[idx] = KdNode::Split {
                    dim: *dim,
                    value: *value,
                    mbr: mbr.clone(),
                    left: l,
                    right: r,
                };
            }
            ManifestNode::Cluster { .. } => return Err(Error::Manifest("cluster node inside a kd tree".into())),
        }
        Ok(idx)
    }

    fn hbc(&mut self, n: &ManifestNode, nodes: &mut Vec<HbcNode>) -> Result<usize> {
        let idx = nodes.len();
        nodes.push(HbcNode {
            mbr: n.mbr().clone(),
            kind: HbcNodeKind::Cluster { children: Vec::new() },
        });
        let kind = match n {
            ManifestNode::Leaf { .. } => {
                let (_, block, placement, rows) = self.leaf(n)?;
                HbcNodeKind::Leaf {
                    rows,
                    block: Some(block),
                    placement: Some(placement),
                }
            }
            ManifestNode::Split {
                mbr,
                dim,
                value,
                left,
                right,
            } => {
                self.check_dim(*dim)?;
                self.check_child(mbr, left)?;
                self.check_child(mbr, right)?;
                let l = self.hbc(left, nodes)?;
                let r = self.hbc(right, nodes)?;
                HbcNodeKind::Split {
                    dim: *dim,
                    value: *value,
                    left: l,
                    right: r,
                }
            }
            ManifestNode::Cluster { mbr, children } => {
                if children.is_empty() {
                    return Err(Error::Manifest("cluster node without children".into()));
                }
                let mut ids = Vec::with_capacity(children.len());
                for c in children {
                    self.check_child(mbr, c)?;
                    ids.push(self.hbc(c, nodes)?);
                }
                HbcNodeKind::Cluster { children: ids }
            }
        };
        nodes[idx].kind = kind;
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_layout, LayoutConfig};
    use crate::scheduler::PlacementPlan;
    use crate::sim::synth::{clustered_table, SynthConfig};
    use crate::workload::{gen_representative, GenConfig};

    fn table() -> Table {
        clustered_table(
            &SynthConfig {
                rows: 3000,
                ..Default::default()
            },
            4,
        )
    }

    fn roundtrip(m: &Manifest) -> Manifest {
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        Manifest::read(buf.as_slice()).unwrap()
    }

    #[test]
    fn every_method_round_trips() {
        let t = table();
        let w = gen_representative(&t, 15, &GenConfig::default(), 1).unwrap();
        for m in Method::ALL {
            let mut l = build_layout(&t, m, &w, &LayoutConfig::new(100), 2).unwrap();
            let picked: Vec<BlockId> = (0..l.forest.len() as BlockId).step_by(3).collect();
            l.forest
                .apply_placement(&PlacementPlan {
                    selected: picked,
                    ..Default::default()
                })
                .unwrap();
            l.forest.blocks_mut()[1].heat = 2.5;
            let man = Manifest::from_forest(&l.forest, Some(m), 100, t.dims()).unwrap();
            let back = roundtrip(&man);
            assert_eq!(back, man, "{m}");
            let f = back.into_forest(&t).unwrap();
            assert_eq!(f.blocks(), l.forest.blocks(), "{m}");
            // hbc arenas come back in preorder, so compare canonical form
            let again = Manifest::from_forest(&f, Some(m), 100, t.dims()).unwrap();
            assert_eq!(again, man, "{m}");
            for q in &w {
                let mut a = f.route(q, 0);
                let mut b = l.forest.route(q, 0);
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b, "{m}");
            }
        }
    }

    fn kd_manifest(t: &Table) -> Manifest {
        let w = gen_representative(t, 5, &GenConfig::default(), 1).unwrap();
        let l = build_layout(t, Method::KdTree, &w, &LayoutConfig::new(500), 2).unwrap();
        Manifest::from_forest(&l.forest, Some(Method::KdTree), 500, t.dims()).unwrap()
    }

    fn first_leaf(n: &mut ManifestNode) -> &mut ManifestNode {
        match n {
            ManifestNode::Split { left, .. } => first_leaf(left),
            ManifestNode::Cluster { children, .. } => first_leaf(&mut children[0]),
            leaf => leaf,
        }
    }

    fn kd_root(m: &mut Manifest) -> &mut ManifestNode {
        match &mut m.trees[0] {
            ManifestTree::Kd { root: Some(r) } => r,
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_broken_manifests() {
        let t = table();
        let good = kd_manifest(&t);
        assert!(good.clone().into_forest(&t).is_ok());

        let mut m = good.clone();
        m.version = 2;
        assert!(matches!(m.into_forest(&t), Err(Error::Manifest(_))));

        // duplicated row
        let mut m = good.clone();
        if let ManifestNode::Leaf { rows, .. } = first_leaf(kd_root(&mut m)) {
            let r = rows[0];
            rows.push(r);
        }
        let e = m.into_forest(&t).unwrap_err().to_string();
        assert!(e.contains("appears twice"), "{e}");

        // dropped row
        let mut m = good.clone();
        if let ManifestNode::Leaf { rows, .. } = first_leaf(kd_root(&mut m)) {
            rows.pop();
        }
        let e = m.into_forest(&t).unwrap_err().to_string();
        assert!(e.contains("in no leaf"), "{e}");

        // renumbered block
        let mut m = good.clone();
        if let ManifestNode::Leaf { block, .. } = first_leaf(kd_root(&mut m)) {
            *block = 7;
        }
        let e = m.into_forest(&t).unwrap_err().to_string();
        assert!(e.contains("expected 0"), "{e}");

        // shrunken leaf MBR
        let mut m = good.clone();
        if let ManifestNode::Leaf { mbr, .. } = first_leaf(kd_root(&mut m)) {
            mbr.max[0] = mbr.min[0];
        }
        assert!(m.into_forest(&t).is_err());

        // wrong table
        let small = clustered_table(
            &SynthConfig {
                rows: 10,
                ..Default::default()
            },
            4,
        );
        assert!(good.into_forest(&small).is_err());
    }

    #[test]
    fn rejects_unknown_node_kind() {
        let text = r#"{"format":"tierblock-manifest","version":1,"method":null,"block_size":4,"rows":1,"dims":1,
            "trees":[{"kind":"kd","root":{"node":"blob","mbr":{"min":[0],"max":[0]}}}]}"#;
        assert!(matches!(Manifest::read(text.as_bytes()), Err(Error::Json(_))));
    }
}
