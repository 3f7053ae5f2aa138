use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::router::QueryTrace;
use crate::types::{Block, BlockId, Query, Table};

/// Hit rates of one interval. Ratios are `None` when no query in the
/// interval had anything to measure.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSample {
    pub interval: usize,
    pub thr: Option<f64>,
    pub bhr: Option<f64>,
    pub queries: usize,
    /// Queries with no satisfying tuple; left out of the THR mean.
    pub empty_queries: usize,
    /// Queries that touched at least one block.
    pub routed_queries: usize,
    pub moved_blocks: usize,
    pub moved_tuples: u64,
}

/// Fraction of the satisfying tuples of `q` that sit in cached blocks.
/// `None` when nothing satisfies `q`.
pub fn thr(q: &Query, required: &[Block], cached: &HashSet<BlockId>, table: &Table) -> Option<f64> {
    let (mut hit, mut all) = (0usize, 0usize);
    for b in required {
        let a = table.count_matching(q, &b.rows);
        all += a;
        if cached.contains(&b.id) {
            hit += a;
        }
    }
    (all > 0).then(|| hit as f64 / all as f64)
}

/// Fraction of required blocks that are cached. `None` for an empty set.
pub fn bhr(required: &[BlockId], cached: &HashSet<BlockId>) -> Option<f64> {
    if required.is_empty() {
        return None;
    }
    let hit = required.iter().filter(|b| cached.contains(b)).count();
    Some(hit as f64 / required.len() as f64)
}

pub fn trace_thr(t: &QueryTrace, cached: impl Fn(BlockId) -> bool) -> Option<f64> {
    let (mut hit, mut all) = (0u64, 0u64);
    for (&b, &m) in t.blocks.iter().zip(&t.matches) {
        all += m as u64;
        if cached(b) {
            hit += m as u64;
        }
    }
    (all > 0).then(|| hit as f64 / all as f64)
}

pub fn trace_bhr(t: &QueryTrace, cached: impl Fn(BlockId) -> bool) -> Option<f64> {
    if t.blocks.is_empty() {
        return None;
    }
    let hit = t.blocks.iter().filter(|&&b| cached(b)).count();
    Some(hit as f64 / t.blocks.len() as f64)
}

/// Running means of per-query ratios.
#[derive(Debug, Clone, Copy, Default)]
pub struct RatioAccumulator {
    thr_sum: f64,
    thr_n: usize,
    bhr_sum: f64,
    bhr_n: usize,
    queries: usize,
    empty: usize,
}

impl RatioAccumulator {
    pub fn add(&mut self, thr: Option<f64>, bhr: Option<f64>) {
        self.queries += 1;
        match thr {
            Some(v) => {
                self.thr_sum += v;
                self.thr_n += 1;
            }
            None => self.empty += 1,
        }
        if let Some(v) = bhr {
            self.bhr_sum += v;
            self.bhr_n += 1;
        }
    }

    pub fn merge(&mut self, other: &RatioAccumulator) {
        self.thr_sum += other.thr_sum;
        self.thr_n += other.thr_n;
        self.bhr_sum += other.bhr_sum;
        self.bhr_n += other.bhr_n;
        self.queries += other.queries;
        self.empty += other.empty;
    }

    pub fn thr(&self) -> Option<f64> {
        (self.thr_n > 0).then(|| self.thr_sum / self.thr_n as f64)
    }

    pub fn bhr(&self) -> Option<f64> {
        (self.bhr_n > 0).then(|| self.bhr_sum / self.bhr_n as f64)
    }

    pub fn sample(&self, interval: usize) -> MetricSample {
        MetricSample {
            interval,
            thr: self.thr(),
            bhr: self.bhr(),
            queries: self.queries,
            empty_queries: self.empty,
            routed_queries: self.bhr_n,
            moved_blocks: 0,
            moved_tuples: 0,
        }
    }
}

pub(crate) fn interval_sample(interval: usize, batch: &[QueryTrace], cached: impl Fn(BlockId) -> bool) -> MetricSample {
    let mut acc = RatioAccumulator::default();
    for t in batch {
        acc.add(trace_thr(t, &cached), trace_bhr(t, &cached));
    }
    acc.sample(interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Bound, Schema};

    fn setup() -> (Table, Vec<Block>, Query) {
        // block 0 holds three matches, block 1 holds one
        let rows: Vec<Vec<f64>> = [0.1, 0.2, 0.3, 0.9, 0.4, 0.95].iter().map(|&v| vec![v]).collect();
        let t = Table::from_rows(Schema::numeric(1), &rows).unwrap();
        let b0 = Block::new(0, &t, vec![0, 1, 2, 3]).unwrap();
        let b1 = Block::new(1, &t, vec![4, 5]).unwrap();
        let q = Query::new(0, vec![Bound { col: 0, lo: 0.05, hi: 0.5 }]).unwrap();
        (t, vec![b0, b1], q)
    }

    #[test]
    fn thr_examples() {
        let (t, blocks, q) = setup();
        let all: HashSet<BlockId> = [0, 1].into();
        let none = HashSet::new();
        let first: HashSet<BlockId> = [0].into();
        assert_eq!(thr(&q, &blocks, &all, &t), Some(1.0));
        assert_eq!(thr(&q, &blocks, &none, &t), Some(0.0));
        assert_eq!(thr(&q, &blocks, &first, &t), Some(0.75));
        let miss = Query::new(0, vec![Bound { col: 0, lo: 0.6, hi: 0.8 }]).unwrap();
        assert_eq!(thr(&miss, &blocks, &all, &t), None);
    }

    #[test]
    fn bhr_examples() {
        let cached: HashSet<BlockId> = [2].into();
        assert_eq!(bhr(&[1, 2, 3, 4], &cached), Some(0.25));
        assert_eq!(bhr(&[2], &cached), Some(1.0));
        assert_eq!(bhr(&[5], &cached), Some(0.0));
        assert_eq!(bhr(&[], &cached), None);
    }

    #[test]
    fn trace_versions_agree() {
        let t = QueryTrace {
            query: 0,
            blocks: vec![0, 1],
            matches: vec![3, 1],
        };
        assert_eq!(trace_thr(&t, |b| b == 0), Some(0.75));
        assert_eq!(trace_bhr(&t, |b| b == 0), Some(0.5));
        // a full block hit implies a full tuple hit
        assert_eq!(trace_thr(&t, |_| true), Some(1.0));
    }

    #[test]
    fn accumulator_skips_empty() {
        let mut a = RatioAccumulator::default();
        a.add(Some(1.0), Some(1.0));
        a.add(None, Some(0.0));
        a.add(Some(0.5), Some(0.5));
        let s = a.sample(3);
        assert_eq!(s.thr, Some(0.75));
        assert_eq!(s.bhr, Some(0.5));
        assert_eq!(s.empty_queries, 1);
        assert_eq!(s.queries, 3);
    }
}
