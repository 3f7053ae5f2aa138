//! Data-aware block generation baselines: sort-and-chunk by key order or
//! Hilbert order, a round-robin K-D tree, and one block per tuple.

use crate::error::{Error, Result};
use crate::router::FlatIndex;
use crate::spatial::{default_order, hilbert_key_of_point, KdConfig, KdTree, SplitRule};
use crate::types::{sort_lexicographic, RowId, Table};

pub const DEFAULT_TUPLE_BASELINE_MAX: usize = 100_000;

/// Lexicographic sort in schema column order, then consecutive chunks.
pub fn key_order_blocks(table: &Table, block_size: usize) -> FlatIndex {
    let mut rows = table.row_ids();
    sort_lexicographic(table, &mut rows);
    FlatIndex::chunked(table, &rows, block_size)
}

/// Median splits cycling through the columns; leaves hold at most
/// `block_size` rows.
pub fn kdtree_blocks(table: &Table, block_size: usize) -> KdTree {
    KdTree::build(
        table,
        &table.row_ids(),
        KdConfig::blocks(block_size.max(1), SplitRule::RoundRobinMedian),
    )
}

/// Sort by Hilbert key (ties by row id), then consecutive chunks.
pub fn curve_blocks(table: &Table, block_size: usize, order: Option<u32>) -> Result<FlatIndex> {
    let order = order.unwrap_or_else(|| default_order(table.dims()));
    let mut keyed = table
        .rows()
        .enumerate()
        .map(|(i, r)| hilbert_key_of_point(r, order).map(|k| (k.key, i as RowId)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_unstable();
    let rows: Vec<RowId> = keyed.into_iter().map(|(_, r)| r).collect();
    Ok(FlatIndex::chunked(table, &rows, block_size))
}

/// One block per tuple, in row order.
pub fn tuple_baseline(table: &Table, max_rows: usize) -> Result<FlatIndex> {
    if table.len() > max_rows {
        return Err(Error::TupleBaselineTooLarge {
            rows: table.len(),
            cap: max_rows,
        });
    }
    Ok(FlatIndex::chunked(table, &table.row_ids(), 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::{RouteTree, RoutingForest};
    use crate::types::{Bound, Query, Schema};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Table::new(Schema::numeric(d), (0..n * d).map(|_| rng.random()).collect()).unwrap()
    }

    fn sizes(f: &FlatIndex) -> Vec<usize> {
        f.leaves.iter().map(|l| l.rows.len()).collect()
    }

    #[test]
    fn key_order_examples() {
        let t = random(10, 1, 1);
        let f = key_order_blocks(&t, 4);
        assert_eq!(sizes(&f), vec![4, 4, 2]);
        // 1-d: blocks are disjoint value ranges in order
        for w in f.leaves.windows(2) {
            assert!(w[0].mbr.max[0] <= w[1].mbr.min[0]);
        }
        assert_eq!(key_order_blocks(&t, 10).leaves.len(), 1);
    }

    #[test]
    fn key_order_uses_schema_column_priority() {
        let t = Table::from_rows(
            Schema::numeric(2),
            &[vec![0.5, 0.1], vec![0.2, 0.9], vec![0.5, 0.0], vec![0.2, 0.3]],
        )
        .unwrap();
        assert_eq!(key_order_blocks(&t, 4).leaves[0].rows, vec![3, 1, 2, 0]);
    }

    #[test]
    fn kdtree_baseline_examples() {
        let t = random(3, 2, 2);
        assert_eq!(kdtree_blocks(&t, 4).leaf_count(), 1);
        let t = random(1000, 3, 3);
        let tree = kdtree_blocks(&t, 64);
        assert!(tree.leaves().all(|l| !l.rows.is_empty() && l.rows.len() <= 64));
        let mut all: Vec<RowId> = tree.leaves().flat_map(|l| l.rows.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, t.row_ids());
    }

    #[test]
    fn curve_matches_key_order_in_one_dimension() {
        let t = random(200, 1, 4);
        // distinct values fall into distinct cells at order 20
        let a = curve_blocks(&t, 16, Some(20)).unwrap();
        let b = key_order_blocks(&t, 16);
        assert_eq!(a, b);
        assert_eq!(curve_blocks(&t, 500, None).unwrap().leaves.len(), 1);
    }

    #[test]
    fn curve_blocks_are_spatially_contiguous() {
        // one tuple per cell of an 8x8 grid, blocks of 4 cells
        let mut rows = Vec::new();
        for x in 0..8 {
            for y in 0..8 {
                rows.push(vec![(x as f64 + 0.5) / 8.0, (y as f64 + 0.5) / 8.0]);
            }
        }
        let t = Table::from_rows(Schema::numeric(2), &rows).unwrap();
        let f = curve_blocks(&t, 4, Some(3)).unwrap();
        let cell = |r: RowId| {
            let v = t.row(r);
            ((v[0] * 8.0) as i32, (v[1] * 8.0) as i32)
        };
        let order: Vec<RowId> = f.leaves.iter().flat_map(|l| l.rows.clone()).collect();
        for w in order.windows(2) {
            let (a, b) = (cell(w[0]), cell(w[1]));
            assert_eq!((a.0 - b.0).abs() + (a.1 - b.1).abs(), 1);
        }
        // each block of four consecutive cells fits a 2x2 or 1x4 footprint
        for l in &f.leaves {
            let area = (l.mbr.max[0] - l.mbr.min[0] + 0.125) * (l.mbr.max[1] - l.mbr.min[1] + 0.125);
            assert!(area <= 0.0625 + 1e-9, "block spans {area}");
        }
    }

    #[test]
    fn tuple_baseline_examples() {
        let t = random(50, 2, 5);
        let f = tuple_baseline(&t, 100).unwrap();
        assert_eq!(f.leaves.len(), 50);
        assert!(matches!(tuple_baseline(&t, 10), Err(Error::TupleBaselineTooLarge { rows: 50, cap: 10 })));

        let forest = RoutingForest::new(&t, vec![RouteTree::Flat(f)]).unwrap();
        let q = Query::new(0, vec![Bound { col: 1, lo: 0.2, hi: 0.6 }]).unwrap();
        let trace = forest.trace(&t, &q, 64);
        let want: Vec<u32> = (0..50).filter(|&r| q.matches(t.row(r))).collect();
        assert_eq!(trace.blocks, want);
    }
}
