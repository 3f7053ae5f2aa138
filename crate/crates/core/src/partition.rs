//! Table partitioning ahead of reorganization: cut the table into pages,
//! tag each page with the queries that touch it, split hot from cold, group
//! hot pages into sub-tables and pack cold rows into cloud blocks.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reorg::{balanced_kmeans_subset, detect_skew, FeatureMatrix};
use crate::spatial::{default_order, hilbert_key_of_point, KdConfig, KdTree, SplitRule};
use crate::types::{Mbr, Query, RowId, Table, Tier};
use crate::util::{mix, par_map, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    Hard,
    #[default]
    Soft,
}

impl std::str::FromStr for FilterMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hard" => Ok(FilterMode::Hard),
            "soft" => Ok(FilterMode::Soft),
            other => Err(format!("unknown filter `{other}` (expected hard | soft)")),
        }
    }
}

impl std::fmt::Display for FilterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterMode::Hard => "hard",
            FilterMode::Soft => "soft",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub page_size: usize,
    pub block_size: usize,
    /// Pages touched by fewer queries than this are cold.
    pub freq_limit: u32,
    /// Cold zones of at most this many pages between two hot zones are absorbed.
    pub size_threshold: usize,
    pub filter: FilterMode,
    /// Largest hot sub-table, in pages.
    pub max_subtable: usize,
    /// Cluster count for hard-mode page clustering; derived from
    /// `max_subtable` when unset.
    pub hard_k: Option<usize>,
    pub phi: f64,
    pub max_iters: usize,
}

impl PartitionConfig {
    pub fn new(block_size: usize) -> Self {
        Self {
            page_size: (block_size / 4).max(1),
            block_size,
            freq_limit: 1,
            size_threshold: 2,
            filter: FilterMode::Soft,
            max_subtable: 4096,
            hard_k: None,
            phi: 1.0,
            max_iters: 25,
        }
    }
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self::new(2048)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub id: usize,
    pub rows: Vec<RowId>,
    pub mbr: Mbr,
    /// Hilbert key of the MBR center.
    pub position: u64,
    /// Bit `j` set when workload query `j` touches the page.
    pub features: Vec<u64>,
    /// Number of touching queries.
    pub heat: u32,
}

/// Pages are the leaves of a max-variance K-D tree that stops below
/// `2 * page_size` rows.
pub fn presegment(table: &Table, page_size: usize) -> Vec<Page> {
    let tree = KdTree::build(table, &table.row_ids(), KdConfig::pages(page_size.max(1)));
    let order = default_order(table.dims().max(1));
    tree.leaves()
        .enumerate()
        .map(|(id, leaf)| Page {
            id,
            rows: leaf.rows.clone(),
            mbr: leaf.mbr.clone(),
            position: hilbert_key_of_point(&leaf.mbr.center(), order).map(|k| k.key).unwrap_or(0),
            features: Vec::new(),
            heat: 0,
        })
        .collect()
}

pub fn encode_pages(pages: &mut [Page], workload: &[Query]) {
    let words = workload.len().div_ceil(64);
    let encoded = par_map(pages, |p| {
        let mut bits = vec![0u64; words];
        for (j, q) in workload.iter().enumerate() {
            if q.intersects(&p.mbr) {
                bits[j / 64] |= 1 << (j % 64);
            }
        }
        bits
    });
    for (p, bits) in pages.iter_mut().zip(encoded) {
        p.heat = bits.iter().map(|w| w.count_ones()).sum();
        p.features = bits;
    }
}

fn feature_matrix(pages: &[Page], width: usize) -> FeatureMatrix {
    let mut x = FeatureMatrix::zeros(pages.len(), width);
    for (i, p) in pages.iter().enumerate() {
        for (w, &word) in p.features.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                x.set(i, w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
    }
    x
}

/// Page indices split by heat: `(hot, cold)`.
pub fn filter_hard(pages: &[Page], freq_limit: u32) -> (Vec<usize>, Vec<usize>) {
    (0..pages.len()).partition(|&i| pages[i].heat >= freq_limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneKind {
    Hot,
    Cold,
}

/// A run of pages along the curve order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zone {
    pub kind: ZoneKind,
    /// Half-open range of positions in the curve order.
    pub start: usize,
    pub end: usize,
    pub pages: Vec<usize>,
}

impl Zone {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoftFilter {
    /// Page indices sorted by position.
    pub order: Vec<usize>,
    /// All zones after merging, in curve order.
    pub zones: Vec<Zone>,
}

impl SoftFilter {
    pub fn hot_zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(|z| z.kind == ZoneKind::Hot)
    }

    pub fn cold_pages(&self) -> Vec<usize> {
        self.zones
            .iter()
            .filter(|z| z.kind == ZoneKind::Cold)
            .flat_map(|z| z.pages.iter().copied())
            .collect()
    }
}

fn coalesce(order: &[usize], labels: &[ZoneKind]) -> Vec<Zone> {
    let mut zones: Vec<Zone> = Vec::new();
    for (pos, (&page, &kind)) in order.iter().zip(labels).enumerate() {
        match zones.last_mut() {
            Some(z) if z.kind == kind => {
                z.end = pos + 1;
                z.pages.push(page);
            }
            _ => zones.push(Zone {
                kind,
                start: pos,
                end: pos + 1,
                pages: vec![page],
            }),
        }
    }
    zones
}

/// Absorb short cold zones sandwiched between hot zones.
pub fn merge_zones(zones: Vec<Zone>, size_threshold: usize) -> Vec<Zone> {
    let mut out: Vec<Zone> = Vec::with_capacity(zones.len());
    for z in zones {
        let n = out.len();
        if z.kind == ZoneKind::Hot
            && n >= 2
            && out[n - 1].kind == ZoneKind::Cold
            && out[n - 1].len() <= size_threshold
            && out[n - 2].kind == ZoneKind::Hot
        {
            let gap = out.pop().expect("n >= 2");
            let prev = out.last_mut().expect("n >= 2");
            prev.end = z.end;
            prev.pages.extend(gap.pages);
            prev.pages.extend(z.pages);
            continue;
        }
        match out.last_mut() {
            Some(prev) if prev.kind == z.kind => {
                prev.end = z.end;
                prev.pages.extend(z.pages);
            }
            _ => out.push(z),
        }
    }
    out
}

pub fn filter_soft(pages: &[Page], freq_limit: u32, size_threshold: usize) -> SoftFilter {
    let mut order: Vec<usize> = (0..pages.len()).collect();
    order.sort_by_key(|&i| (pages[i].position, i));
    let labels: Vec<ZoneKind> = order
        .iter()
        .map(|&i| if pages[i].heat >= freq_limit { ZoneKind::Hot } else { ZoneKind::Cold })
        .collect();
    let zones = merge_zones(coalesce(&order, &labels), size_threshold);
    SoftFilter { order, zones }
}

/// Group hot pages into sub-tables (lists of page indices).
///
/// `groups` holds the hot input: the single list of hot pages for hard mode,
/// or one list per hot zone for soft mode.
pub fn cluster_hot(pages: &[Page], groups: &[Vec<usize>], cfg: &PartitionConfig, seed: u64) -> Vec<Vec<usize>> {
    let width = pages.first().map_or(0, |p| p.features.len() * 64);
    let x = feature_matrix(pages, width);
    let cap = cfg.max_subtable.max(1);
    match cfg.filter {
        FilterMode::Hard => {
            let hot: Vec<usize> = groups.iter().flatten().copied().collect();
            if hot.is_empty() {
                return Vec::new();
            }
            let k = cfg.hard_k.unwrap_or_else(|| hot.len().div_ceil(cap)).clamp(1, hot.len());
            if k == 1 {
                return vec![hot];
            }
            let res = balanced_kmeans_subset(&x, &hot, k, cfg.phi, cfg.max_iters, seed).expect("k <= pages");
            let mut out = vec![Vec::new(); k];
            for (&p, &c) in hot.iter().zip(&res.assignment) {
                out[c].push(p);
            }
            out.retain(|g| !g.is_empty());
            out
        }
        FilterMode::Soft => {
            let mut out = Vec::new();
            for (z, zone) in groups.iter().enumerate() {
                split_zone(&x, zone.clone(), cap, cfg, mix(seed, z as u64), &mut out);
            }
            out
        }
    }
}

/// Top-down balanced clustering of an oversized zone until every part holds
/// at most `cap` pages. Zones whose encodings are too uniform to cluster are
/// cut into consecutive runs along the curve instead.
fn split_zone(x: &FeatureMatrix, zone: Vec<usize>, cap: usize, cfg: &PartitionConfig, seed: u64, out: &mut Vec<Vec<usize>>) {
    let mut queue = VecDeque::from([zone]);
    let mut step = 0u64;
    while let Some(part) = queue.pop_front() {
        if part.len() <= cap {
            if !part.is_empty() {
                out.push(part);
            }
            continue;
        }
        step += 1;
        let k = part.len().div_ceil(cap).clamp(2, 16);
        if detect_skew(x, &part, k, 0.9) {
            queue.extend(part.chunks(cap).map(|c| c.to_vec()));
            continue;
        }
        let res = balanced_kmeans_subset(x, &part, k, cfg.phi, cfg.max_iters, mix(seed, step)).expect("k <= part");
        let mut parts = vec![Vec::new(); k];
        for (&p, &c) in part.iter().zip(&res.assignment) {
            parts[c].push(p);
        }
        if parts.iter().any(|p| p.len() == part.len()) {
            // no progress: fall back to cutting along the curve
            queue.extend(part.chunks(cap).map(|c| c.to_vec()));
            continue;
        }
        queue.extend(parts.into_iter().filter(|p| !p.is_empty()));
    }
}

/// Pack cold rows into cloud blocks under a max-variance K-D tree.
pub fn reorganize_cold(table: &Table, cold_rows: &[RowId], block_size: usize) -> KdTree {
    let mut tree = KdTree::build(
        table,
        cold_rows,
        KdConfig::blocks(block_size.max(1), SplitRule::MaxVarianceMedian),
    );
    let leaves = tree.leaf_indices().to_vec();
    for i in leaves {
        tree.leaf_mut(i).placement = Some(Tier::Cloud);
    }
    tree
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSummary {
    pub kind: ZoneKind,
    pub pages: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub filter: FilterMode,
    pub page_size: usize,
    pub freq_limit: u32,
    pub size_threshold: usize,
    pub max_subtable: usize,
    pub pages: usize,
    pub hot_pages: usize,
    pub cold_pages: usize,
    pub hot_rows: usize,
    pub cold_rows: usize,
    /// Rows per hot sub-table.
    pub subtables: Vec<usize>,
    /// Soft mode only.
    pub zones: Vec<ZoneSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOutput {
    /// Row ids per hot sub-table.
    pub hot: Vec<Vec<RowId>>,
    pub cold: KdTree,
    pub report: PartitionReport,
}

/// Wall-clock time of each partitioning step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PartitionTimes {
    pub presegment: Duration,
    pub encode: Duration,
    pub filter_and_cluster: Duration,
    pub cold: Duration,
}

pub fn partition_table(table: &Table, workload: &[Query], cfg: &PartitionConfig, seed: u64) -> Result<PartitionOutput> {
    partition_table_timed(table, workload, cfg, seed).map(|(out, _)| out)
}

pub fn partition_table_timed(
    table: &Table,
    workload: &[Query],
    cfg: &PartitionConfig,
    seed: u64,
) -> Result<(PartitionOutput, PartitionTimes)> {
    let mut times = PartitionTimes::default();
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if cfg.page_size == 0 || cfg.block_size == 0 {
        return Err(Error::Config("page_size and block_size must be positive".into()));
    }
    let clock = Instant::now();
    let mut pages = presegment(table, cfg.page_size);
    times.presegment = clock.elapsed();
    let clock = Instant::now();
    encode_pages(&mut pages, workload);
    times.encode = clock.elapsed();
    let clock = Instant::now();

    let (groups, cold_pages, zones) = match cfg.filter {
        FilterMode::Hard => {
            let (hot, cold) = filter_hard(&pages, cfg.freq_limit);
            (vec![hot], cold, Vec::new())
        }
        FilterMode::Soft => {
            let sf = filter_soft(&pages, cfg.freq_limit, cfg.size_threshold);
            let rows_of = |z: &Zone| z.pages.iter().map(|&p| pages[p].rows.len()).sum();
            let zones = sf
                .zones
                .iter()
                .map(|z| ZoneSummary {
                    kind: z.kind,
                    pages: z.len(),
                    rows: rows_of(z),
                })
                .collect();
            (sf.hot_zones().map(|z| z.pages.clone()).collect(), sf.cold_pages(), zones)
        }
    };
    let hot_pages: usize = groups.iter().map(Vec::len).sum();
    let subtables = cluster_hot(&pages, &groups, cfg, seed);
    let hot: Vec<Vec<RowId>> = subtables
        .iter()
        .map(|g| {
            let mut rows: Vec<RowId> = g.iter().flat_map(|&p| pages[p].rows.iter().copied()).collect();
            rows.sort_unstable();
            rows
        })
        .collect();
    times.filter_and_cluster = clock.elapsed();
    let clock = Instant::now();
    let mut cold_rows: Vec<RowId> = cold_pages.iter().flat_map(|&p| pages[p].rows.iter().copied()).collect();
    cold_rows.sort_unstable();
    let cold = reorganize_cold(table, &cold_rows, cfg.block_size);
    times.cold = clock.elapsed();

    let hot_rows: usize = hot.iter().map(Vec::len).sum();
    debug_assert_eq!(hot_rows + cold_rows.len(), table.len());
    let report = PartitionReport {
        filter: cfg.filter,
        page_size: cfg.page_size,
        freq_limit: cfg.freq_limit,
        size_threshold: cfg.size_threshold,
        max_subtable: cfg.max_subtable,
        pages: pages.len(),
        hot_pages,
        cold_pages: cold_pages.len(),
        hot_rows,
        cold_rows: cold_rows.len(),
        subtables: hot.iter().map(Vec::len).collect(),
        zones,
    };
    Ok((PartitionOutput { hot, cold, report }, times))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Bound, Schema};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, d: usize, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Table::new(Schema::numeric(d), (0..n * d).map(|_| rng.random()).collect()).unwrap()
    }

    fn q(col: usize, lo: f64, hi: f64) -> Query {
        Query::new(0, vec![Bound { col, lo, hi }]).unwrap()
    }

    fn page(heat: u32, position: u64) -> Page {
        Page {
            id: 0,
            rows: vec![],
            mbr: Mbr::point(&[0.0]),
            position,
            features: vec![],
            heat,
        }
    }

    fn kinds(sf: &SoftFilter) -> Vec<(ZoneKind, usize)> {
        sf.zones.iter().map(|z| (z.kind, z.len())).collect()
    }

    #[test]
    fn presegment_examples() {
        let t = uniform(30, 2, 1);
        assert_eq!(presegment(&t, 16).len(), 1);
        let t = uniform(400, 2, 2);
        let pages = presegment(&t, 100);
        assert!(pages.len() >= 2);
        assert!(pages.iter().all(|p| p.rows.len() < 200));
        let mut all: Vec<RowId> = pages.iter().flat_map(|p| p.rows.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, t.row_ids());
    }

    #[test]
    fn encode_examples() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let t = Table::from_rows(Schema::numeric(1), &rows).unwrap();
        let mut pages = presegment(&t, 4);
        assert_eq!(pages.len(), 2);
        let w = vec![q(0, -1.0, 2.0), q(0, 2.0, 3.0), q(0, 0.6, 0.9)];
        encode_pages(&mut pages, &w);
        pages.sort_by(|a, b| a.mbr.min[0].total_cmp(&b.mbr.min[0]));
        assert_eq!(pages[0].features, vec![0b001]);
        assert_eq!(pages[1].features, vec![0b101]);
        assert_eq!(pages[1].heat, 2);
    }

    #[test]
    fn hard_filter_examples() {
        let pages = vec![page(0, 0), page(2, 1), page(5, 2)];
        assert_eq!(filter_hard(&pages, 0).0, vec![0, 1, 2]);
        assert!(filter_hard(&pages, 6).0.is_empty());
        assert_eq!(filter_hard(&pages, 2), (vec![1, 2], vec![0]));
    }

    #[test]
    fn soft_filter_examples() {
        // H C H with a one-page gap merges
        let pages = vec![page(3, 0), page(0, 1), page(2, 2)];
        let sf = filter_soft(&pages, 1, 2);
        assert_eq!(kinds(&sf), vec![(ZoneKind::Hot, 3)]);
        assert!(sf.cold_pages().is_empty());

        // a five-page gap survives
        let mut pages = vec![page(3, 0)];
        pages.extend((1..6).map(|i| page(0, i)));
        pages.push(page(1, 6));
        let sf = filter_soft(&pages, 1, 2);
        assert_eq!(kinds(&sf), vec![(ZoneKind::Hot, 1), (ZoneKind::Cold, 5), (ZoneKind::Hot, 1)]);

        let cold = vec![page(0, 0), page(0, 1)];
        assert_eq!(filter_soft(&cold, 1, 2).hot_zones().count(), 0);
    }

    #[test]
    fn soft_filter_sorts_by_position() {
        let pages = vec![page(1, 9), page(0, 5), page(1, 1)];
        let sf = filter_soft(&pages, 1, 0);
        assert_eq!(sf.order, vec![2, 1, 0]);
        assert_eq!(kinds(&sf), vec![(ZoneKind::Hot, 1), (ZoneKind::Cold, 1), (ZoneKind::Hot, 1)]);
    }

    proptest! {
        #[test]
        fn soft_filter_properties(heats in prop::collection::vec(0u32..4, 1..60), limit in 0u32..4, thr in 0usize..4) {
            let pages: Vec<Page> = heats.iter().enumerate().map(|(i, &h)| page(h, i as u64)).collect();
            let sf = filter_soft(&pages, limit, thr);
            // zones tile the order and alternate
            let mut pos = 0;
            for w in sf.zones.windows(2) {
                prop_assert_ne!(w[0].kind, w[1].kind);
            }
            for z in &sf.zones {
                prop_assert_eq!(z.start, pos);
                prop_assert_eq!(&z.pages[..], &sf.order[z.start..z.end]);
                pos = z.end;
            }
            prop_assert_eq!(pos, pages.len());
            // hot pages are never cold
            for p in sf.cold_pages() {
                prop_assert!(pages[p].heat < limit);
            }
            // merging again is a no-op
            prop_assert_eq!(merge_zones(sf.zones.clone(), thr), sf.zones);
        }
    }

    fn feature_pages(bits: &[u64]) -> Vec<Page> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| Page {
                id: i,
                rows: vec![i as RowId],
                mbr: Mbr::point(&[0.0]),
                position: i as u64,
                features: vec![b],
                heat: b.count_ones(),
            })
            .collect()
    }

    #[test]
    fn cluster_hot_examples() {
        let cfg = PartitionConfig {
            max_subtable: 4,
            ..PartitionConfig::new(64)
        };
        let pages = feature_pages(&[0b01; 3]);
        assert_eq!(cluster_hot(&pages, &[vec![0, 1, 2]], &cfg, 0), vec![vec![0, 1, 2]]);

        // two orthogonal feature groups, hard mode with k = 2
        let pages = feature_pages(&[0b0011, 0b1100, 0b0011, 0b1100, 0b0011, 0b1100]);
        let hard = PartitionConfig {
            filter: FilterMode::Hard,
            hard_k: Some(2),
            ..cfg
        };
        let mut groups = cluster_hot(&pages, &[(0..6).collect()], &hard, 7);
        groups.sort();
        assert_eq!(groups, vec![vec![0, 2, 4], vec![1, 3, 5]]);

        // a zone of 3 x max_subtable pages splits into bounded parts
        let bits: Vec<u64> = (0..12).map(|i| 1 << (i % 3)).collect();
        let pages = feature_pages(&bits);
        let parts = cluster_hot(&pages, &[(0..12).collect()], &cfg, 1);
        assert!(parts.len() >= 2);
        assert!(parts.iter().all(|p| p.len() <= 4));
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());

        // identical encodings are cut along the curve
        let pages = feature_pages(&[1; 9]);
        let parts = cluster_hot(&pages, &[(0..9).collect()], &cfg, 1);
        assert_eq!(parts, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8]]);
    }

    #[test]
    fn reorganize_cold_examples() {
        let t = uniform(500, 3, 4);
        assert!(reorganize_cold(&t, &[], 100).is_empty());
        let few: Vec<RowId> = (0..80).collect();
        assert_eq!(reorganize_cold(&t, &few, 100).leaf_count(), 1);
        let tree = reorganize_cold(&t, &t.row_ids(), 100);
        assert!(tree.leaf_count() >= 3);
        assert!(tree.leaves().all(|l| l.rows.len() <= 100 && l.placement == Some(Tier::Cloud)));
        let mut all: Vec<RowId> = tree.leaves().flat_map(|l| l.rows.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, t.row_ids());
    }

    fn check_conservation(t: &Table, out: &PartitionOutput) -> (Vec<RowId>, Vec<RowId>) {
        let hot: Vec<RowId> = out.hot.concat();
        let cold: Vec<RowId> = out.cold.leaves().flat_map(|l| l.rows.clone()).collect();
        let mut all = [hot.clone(), cold.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, t.row_ids());
        (hot, cold)
    }

    #[test]
    fn partition_examples() {
        let t = uniform(4000, 2, 5);
        let w = vec![q(0, 0.05, 0.2), q(0, 0.3, 0.45), q(1, 0.1, 0.3)];
        for filter in [FilterMode::Hard, FilterMode::Soft] {
            let cfg = PartitionConfig {
                freq_limit: 0,
                filter,
                ..PartitionConfig::new(256)
            };
            let out = partition_table(&t, &w, &cfg, 1).unwrap();
            let (_, cold) = check_conservation(&t, &out);
            assert!(cold.is_empty());
        }

        // only the left half is queried: every right-half row is cold
        let w = vec![q(0, 0.0, 0.2), q(0, 0.15, 0.45), q(0, 0.3, 0.5)];
        let cfg = PartitionConfig {
            filter: FilterMode::Hard,
            ..PartitionConfig::new(256)
        };
        // 1-d so that pages are short intervals (under 512 rows, about 0.13 wide)
        let line = uniform(4000, 1, 6);
        let out = partition_table(&line, &w, &cfg, 1).unwrap();
        let (hot, _) = check_conservation(&line, &out);
        let hot: std::collections::HashSet<RowId> = hot.into_iter().collect();
        for r in 0..line.len() as RowId {
            let x = line.row(r);
            if x[0] > 0.65 {
                assert!(!hot.contains(&r));
            }
            if w.iter().any(|q| q.matches(x)) {
                assert!(hot.contains(&r));
            }
        }
        assert_eq!(out.report.hot_rows + out.report.cold_rows, line.len());

        let soft = PartitionConfig::new(256);
        assert_eq!(partition_table(&t, &w, &soft, 9).unwrap(), partition_table(&t, &w, &soft, 9).unwrap());
    }
}
