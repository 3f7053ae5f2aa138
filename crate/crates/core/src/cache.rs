//! End-device block cache with pluggable replacement. Capacity and block
//! sizes are in tuples; a miss evicts until the block fits.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::router::{QueryTrace, RoutingForest};
use crate::sim::metrics::{trace_bhr, trace_thr, MetricSample, RatioAccumulator};
use crate::types::{BlockId, Table, Tier};
use crate::workload::TimedWorkload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Lru,
    Lfu,
    Clock,
    Arc,
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lru" => Ok(Policy::Lru),
            "lfu" => Ok(Policy::Lfu),
            "clock" => Ok(Policy::Clock),
            "arc" => Ok(Policy::Arc),
            other => Err(format!("unknown policy `{other}` (expected lru | lfu | clock | arc)")),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::Lru => "lru",
            Policy::Lfu => "lfu",
            Policy::Clock => "clock",
            Policy::Arc => "arc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccessOutcome {
    pub hit: bool,
    pub evicted: Vec<BlockId>,
    /// The block is larger than the whole cache and was not admitted.
    pub bypassed: bool,
}

/// Blocks in recency order with their sizes.
#[derive(Debug, Clone, Default)]
struct OrderedList {
    order: BTreeMap<u64, BlockId>,
    index: HashMap<BlockId, (u64, u64)>,
    size: u64,
    seq: u64,
}

impl OrderedList {
    fn contains(&self, id: BlockId) -> bool {
        self.index.contains_key(&id)
    }

    fn push_mru(&mut self, id: BlockId, size: u64) {
        self.seq += 1;
        self.order.insert(self.seq, id);
        self.index.insert(id, (self.seq, size));
        self.size += size;
    }

    fn remove(&mut self, id: BlockId) -> Option<u64> {
        let (tick, size) = self.index.remove(&id)?;
        self.order.remove(&tick);
        self.size -= size;
        Some(size)
    }

    fn pop_lru(&mut self) -> Option<(BlockId, u64)> {
        let (_, id) = self.order.pop_first()?;
        let (_, size) = self.index.remove(&id).expect("indexed");
        self.size -= size;
        Some((id, size))
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.order.values().copied()
    }
}

#[derive(Debug, Clone, Default)]
struct Lru {
    list: OrderedList,
}

#[derive(Debug, Clone, Default)]
struct Lfu {
    /// (frequency, last tick, id)
    order: std::collections::BTreeSet<(u64, u64, BlockId)>,
    index: HashMap<BlockId, (u64, u64, u64)>,
    size: u64,
}

#[derive(Debug, Clone, Default)]
struct Clock {
    /// (id, size, reference bit) in ring order.
    ring: Vec<(BlockId, u64, bool)>,
    hand: usize,
    size: u64,
}

/// ARC with sizes: `p` is the target size of `t1` in tuples.
#[derive(Debug, Clone, Default)]
struct Arc {
    t1: OrderedList,
    t2: OrderedList,
    b1: OrderedList,
    b2: OrderedList,
    p: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Lru(Lru),
    Lfu(Lfu),
    Clock(Clock),
    Arc(Arc),
}

#[derive(Debug, Clone)]
pub struct CacheState {
    capacity: u64,
    tick: u64,
    inner: Inner,
}

impl CacheState {
    pub fn new(policy: Policy, capacity: u64) -> Self {
        let inner = match policy {
            Policy::Lru => Inner::Lru(Lru::default()),
            Policy::Lfu => Inner::Lfu(Lfu::default()),
            Policy::Clock => Inner::Clock(Clock::default()),
            Policy::Arc => Inner::Arc(Arc::default()),
        };
        Self {
            capacity,
            tick: 0,
            inner,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        match &self.inner {
            Inner::Lru(c) => c.list.size,
            Inner::Lfu(c) => c.size,
            Inner::Clock(c) => c.size,
            Inner::Arc(c) => c.t1.size + c.t2.size,
        }
    }

    pub fn contains(&self, id: BlockId) -> bool {
        match &self.inner {
            Inner::Lru(c) => c.list.contains(id),
            Inner::Lfu(c) => c.index.contains_key(&id),
            Inner::Clock(c) => c.ring.iter().any(|e| e.0 == id),
            Inner::Arc(c) => c.t1.contains(id) || c.t2.contains(id),
        }
    }

    /// Resident ids, ascending.
    pub fn residents(&self) -> Vec<BlockId> {
        let mut ids: Vec<BlockId> = match &self.inner {
            Inner::Lru(c) => c.list.ids().collect(),
            Inner::Lfu(c) => c.index.keys().copied().collect(),
            Inner::Clock(c) => c.ring.iter().map(|e| e.0).collect(),
            Inner::Arc(c) => c.t1.ids().chain(c.t2.ids()).collect(),
        };
        ids.sort_unstable();
        ids
    }

    pub fn access(&mut self, id: BlockId, size: u64) -> AccessOutcome {
        self.tick += 1;
        let tick = self.tick;
        let cap = self.capacity;
        let mut out = AccessOutcome::default();
        if self.contains(id) {
            out.hit = true;
        } else if size > cap {
            out.bypassed = true;
            return out;
        }
        match &mut self.inner {
            Inner::Lru(c) => {
                if out.hit {
                    c.list.remove(id);
                } else {
                    while c.list.size + size > cap {
                        out.evicted.push(c.list.pop_lru().expect("non-empty while over").0);
                    }
                }
                c.list.push_mru(id, size);
            }
            Inner::Lfu(c) => {
                if out.hit {
                    let (f, t, s) = c.index[&id];
                    c.order.remove(&(f, t, id));
                    c.order.insert((f + 1, tick, id));
                    c.index.insert(id, (f + 1, tick, s));
                } else {
                    while c.size + size > cap {
                        let (_, _, victim) = c.order.pop_first().expect("non-empty while over");
                        c.size -= c.index.remove(&victim).expect("indexed").2;
                        out.evicted.push(victim);
                    }
                    c.order.insert((1, tick, id));
                    c.index.insert(id, (1, tick, size));
                    c.size += size;
                }
            }
            Inner::Clock(c) => {
                if out.hit {
                    let e = c.ring.iter_mut().find(|e| e.0 == id).expect("resident");
                    e.2 = true;
                } else {
                    while c.size + size > cap {
                        if c.hand >= c.ring.len() {
                            c.hand = 0;
                        }
                        let e = &mut c.ring[c.hand];
                        if e.2 {
                            e.2 = false;
                            c.hand += 1;
                        } else {
                            let (victim, s, _) = c.ring.remove(c.hand);
                            c.size -= s;
                            out.evicted.push(victim);
                        }
                    }
                    if c.hand > c.ring.len() {
                        c.hand = 0;
                    }
                    // the new block sits just behind the hand
                    c.ring.insert(c.hand, (id, size, true));
                    c.hand += 1;
                    c.size += size;
                }
            }
            Inner::Arc(c) => c.access(id, size, cap, &mut out),
        }
        out
    }
}

impl Arc {
    fn replace(&mut self, in_b2: bool, out: &mut AccessOutcome) {
        let t1 = self.t1.size as f64;
        let from_t1 = self.t1.len() > 0 && ((in_b2 && t1 >= self.p) || t1 > self.p || self.t2.len() == 0);
        if from_t1 {
            let (v, s) = self.t1.pop_lru().expect("checked");
            self.b1.push_mru(v, s);
            out.evicted.push(v);
        } else {
            let (v, s) = self.t2.pop_lru().expect("t1 or t2 non-empty while over");
            self.b2.push_mru(v, s);
            out.evicted.push(v);
        }
    }

    fn access(&mut self, id: BlockId, size: u64, cap: u64, out: &mut AccessOutcome) {
        let c = cap as f64;
        let s = size as f64;
        if self.t1.remove(id).is_some() || self.t2.remove(id).is_some() {
            self.t2.push_mru(id, size);
            return;
        }
        let in_b2 = if self.b1.contains(id) {
            let ratio = (self.b2.size as f64 / self.b1.size.max(1) as f64).max(1.0);
            self.p = (self.p + s * ratio).min(c);
            self.b1.remove(id);
            Some(false)
        } else if self.b2.contains(id) {
            let ratio = (self.b1.size as f64 / self.b2.size.max(1) as f64).max(1.0);
            self.p = (self.p - s * ratio).max(0.0);
            self.b2.remove(id);
            Some(true)
        } else {
            None
        };
        if in_b2.is_none() {
            while self.t1.size + self.b1.size + size > cap && self.b1.len() > 0 {
                self.b1.pop_lru();
            }
        }
        while self.t1.size + self.t2.size + size > cap {
            self.replace(in_b2 == Some(true), out);
        }
        match in_b2 {
            Some(_) => self.t2.push_mru(id, size),
            None => self.t1.push_mru(id, size),
        }
        // ghost bounds: |t1| + |b1| <= c and the directory stays within 2c
        while self.t1.size + self.b1.size > cap && self.b1.len() > 0 {
            self.b1.pop_lru();
        }
        while self.t1.size + self.t2.size + self.b1.size + self.b2.size > 2 * cap {
            if self.b2.len() > 0 {
                self.b2.pop_lru();
            } else if self.b1.len() > 0 {
                self.b1.pop_lru();
            } else {
                break;
            }
        }
    }
}

/// Snapshot of ARC's lists for invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLists {
    pub t1: Vec<BlockId>,
    pub t2: Vec<BlockId>,
    pub b1: Vec<BlockId>,
    pub b2: Vec<BlockId>,
    pub sizes: [u64; 4],
    pub p: f64,
}

impl CacheState {
    /// `None` unless the policy is ARC.
    pub fn arc_lists(&self) -> Option<ArcLists> {
        match &self.inner {
            Inner::Arc(a) => Some(ArcLists {
                t1: a.t1.ids().collect(),
                t2: a.t2.ids().collect(),
                b1: a.b1.ids().collect(),
                b2: a.b2.ids().collect(),
                sizes: [a.t1.size, a.t2.size, a.b1.size, a.b2.size],
                p: a.p,
            }),
            _ => None,
        }
    }
}

/// Counts of blocks pulled into the end cache, by source tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FetchTally {
    pub from_edge: u64,
    pub from_cloud: u64,
    pub tuples_from_edge: u64,
    pub tuples_from_cloud: u64,
    pub bypassed: u64,
    pub evictions: u64,
}

/// One simulated end device.
#[derive(Debug, Clone)]
pub struct CacheRun {
    pub cache: CacheState,
    pub fetches: FetchTally,
}

impl CacheRun {
    pub fn new(policy: Policy, capacity: u64) -> Self {
        Self {
            cache: CacheState::new(policy, capacity),
            fetches: FetchTally::default(),
        }
    }

    /// Serve one interval in arrival order. Hit rates are taken against
    /// the cache contents before the query's own blocks are admitted.
    pub fn serve_interval(&mut self, interval: usize, batch: &[QueryTrace], forest: &RoutingForest) -> MetricSample {
        let mut acc = RatioAccumulator::default();
        for t in batch {
            let thr = trace_thr(t, |b| self.cache.contains(b));
            let bhr = trace_bhr(t, |b| self.cache.contains(b));
            acc.add(thr, bhr);
            for &b in &t.blocks {
                let block = &forest.blocks()[b as usize];
                let size = block.size() as u64;
                let res = self.cache.access(b, size);
                self.fetches.evictions += res.evicted.len() as u64;
                if res.bypassed {
                    self.fetches.bypassed += 1;
                }
                if !res.hit {
                    if block.placement == Tier::Edge {
                        self.fetches.from_edge += 1;
                        self.fetches.tuples_from_edge += size;
                    } else {
                        self.fetches.from_cloud += 1;
                        self.fetches.tuples_from_cloud += size;
                    }
                }
            }
        }
        acc.sample(interval)
    }
}

/// Run the end cache alone over a workload against a fixed placement.
pub fn run_cache_sim(
    table: &Table,
    workload: &TimedWorkload,
    forest: &RoutingForest,
    policy: Policy,
    capacity: u64,
    leaf_scan_threshold: usize,
) -> (Vec<MetricSample>, FetchTally) {
    let mut run = CacheRun::new(policy, capacity);
    let samples = workload
        .intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let qs: Vec<_> = iv.iter().map(|t| t.query.clone()).collect();
            let traces = forest.trace_all(table, &qs, leaf_scan_threshold);
            run.serve_interval(i, &traces, forest)
        })
        .collect();
    (samples, run.fetches)
}
