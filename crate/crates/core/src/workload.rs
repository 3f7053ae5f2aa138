//! Representative query generation, arrival-rate curves and the
//! perturbed train/test workloads built from them.
//!
//! Workload file grammar (one query per line, fields separated by single
//! spaces, floats in shortest round-trip form):
//!
//! ```text
//! # intervals=<N>
//! <interval> <query id> <rep id> <col>,<lo>,<hi> [<col>,<lo>,<hi> ...]
//! ```
//!
//! Lines starting with `#` other than the `intervals=` header are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Bound, Query, Table};
use crate::util::mix;

/// Bounds pushed past the domain edge by this much so strict predicates
/// still admit the normalized extremes 0 and 1.
pub const OPEN_EDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Bounded columns per query, inclusive range (clamped to the table width).
    pub min_preds: usize,
    pub max_preds: usize,
    /// Per-column range width, drawn uniformly from `[width_min, width_max]`.
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            min_preds: 1,
            max_preds: 3,
            width_min: 0.005,
            width_max: 0.03,
        }
    }
}

impl GenConfig {
    /// Bound every column with a fixed width.
    pub fn all_columns(dims: usize, width: f64) -> Self {
        Self {
            min_preds: dims,
            max_preds: dims,
            width_min: width,
            width_max: width,
        }
    }
}

/// Window of width `w` around `c`, shifted to stay inside `[0, 1]`, with
/// edge-touching bounds opened past the domain.
fn window(c: f64, w: f64) -> (f64, f64) {
    let w = w.clamp(1e-9, 1.0);
    let lo = (c - w / 2.0).clamp(0.0, 1.0 - w);
    let hi = lo + w;
    let lo = if lo <= 0.0 { -OPEN_EDGE } else { lo };
    let hi = if hi >= 1.0 { 1.0 + OPEN_EDGE } else { hi };
    (lo, hi)
}

pub fn gen_representative(table: &Table, count: usize, cfg: &GenConfig, seed: u64) -> Result<Vec<Query>> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if count == 0 {
        return Err(Error::Config("representative count must be at least 1".into()));
    }
    let d = table.dims();
    let lo_k = cfg.min_preds.clamp(1, d);
    let hi_k = cfg.max_preds.clamp(lo_k, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for id in 0..count {
        let center = table.row(rng.random_range(0..table.len()) as u32);
        let k = rng.random_range(lo_k..=hi_k);
        let mut cols: Vec<usize> = (0..d).collect();
        // partial Fisher-Yates
        for i in 0..k {
            let j = rng.random_range(i..d);
            cols.swap(i, j);
        }
        let bounds = cols[..k]
            .iter()
            .map(|&col| {
                let w = if cfg.width_max > cfg.width_min {
                    rng.random_range(cfg.width_min..=cfg.width_max)
                } else {
                    cfg.width_min
                };
                let (lo, hi) = window(center[col], w);
                Bound { col, lo, hi }
            })
            .collect();
        out.push(Query::new(id as u32, bounds)?);
    }
    Ok(out)
}

/// Per-representative frequency per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCurve {
    pub series: Vec<Vec<u32>>,
}

impl ArrivalCurve {
    pub fn intervals(&self) -> usize {
        self.series.first().map(Vec::len).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.series.iter().flatten().map(|&v| v as u64).sum()
    }
}

const MAX_BASE_RATE: u32 = 5;

/// Each representative gets a base rate in `1..=5` modulated by a slow
/// sinusoid plus Gaussian noise, both scaled by `burstiness`.
/// `burstiness == 0` yields flat curves.
pub fn gen_arrival_curves(reps: &[Query], intervals: usize, burstiness: f64, seed: u64) -> ArrivalCurve {
    let intervals = intervals.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let mut series: Vec<Vec<u32>> = reps
        .iter()
        .map(|_| {
            let base = rng.random_range(1..=MAX_BASE_RATE) as f64;
            let period = rng.random_range(intervals as f64 / 2.0..=intervals as f64 * 2.0).max(1.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (0..intervals)
                .map(|t| {
                    let wave = (std::f64::consts::TAU * t as f64 / period + phase).sin();
                    let z = noise.sample(&mut rng);
                    let m = (1.0 + burstiness * (wave + z)).max(0.0);
                    (base * m).round() as u32
                })
                .collect()
        })
        .collect();
    if !series.is_empty() && series.iter().flatten().all(|&v| v == 0) {
        series[0][0] = 1;
    }
    ArrivalCurve { series }
}

pub fn perturb_query(q: &Query, skew: f64, seed: u64) -> Query {
    perturb_with(q, skew, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Shift each bound by uniform noise of magnitude at most `skew * width`,
/// keeping it inside the domain (or the query's own wider range) and
/// keeping `lo < hi`.
pub fn perturb_with<R: Rng>(q: &Query, skew: f64, rng: &mut R) -> Query {
    let skew = skew.clamp(0.0, 1.0);
    if skew == 0.0 {
        return q.clone();
    }
    let bounds = q
        .bounds()
        .iter()
        .map(|b| {
            let w = b.hi - b.lo;
            let amp = skew * w;
            let floor = b.lo.min(0.0);
            let ceil = b.hi.max(1.0);
            let mut lo = (b.lo + rng.random_range(-amp..=amp)).clamp(floor, ceil);
            let mut hi = (b.hi + rng.random_range(-amp..=amp)).clamp(floor, ceil);
            if lo >= hi {
                let mid = 0.5 * (lo + hi);
                lo = mid - 1e-6 * w;
                hi = mid + 1e-6 * w;
            }
            Bound { col: b.col, lo, hi }
        })
        .collect();
    Query::new(q.id, bounds).expect("perturbation keeps bounds valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedQuery {
    pub rep: u32,
    pub query: Query,
}

/// Queries grouped by interval, in arrival order within each interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimedWorkload {
    pub intervals: Vec<Vec<TimedQuery>>,
}

impl TimedWorkload {
    pub fn len(&self) -> usize {
        self.intervals.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn interval_sizes(&self) -> Vec<usize> {
        self.intervals.iter().map(Vec::len).collect()
    }

    pub fn queries(&self) -> impl Iterator<Item = &Query> {
        self.intervals.iter().flatten().map(|t| &t.query)
    }

    /// Wrap plain queries as a single interval (rep id = query id).
    pub fn single_interval(queries: &[Query]) -> Self {
        Self {
            intervals: vec![queries
                .iter()
                .map(|q| TimedQuery {
                    rep: q.id,
                    query: q.clone(),
                })
                .collect()],
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# intervals={}\n", self.intervals.len());
        for (i, iv) in self.intervals.iter().enumerate() {
            for tq in iv {
                write!(s, "{i} {} {}", tq.query.id, tq.rep).unwrap();
                for b in tq.query.bounds() {
                    write!(s, " {},{},{}", b.col, b.lo, b.hi).unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut intervals: Vec<Vec<TimedQuery>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("intervals=") {
                    let k: usize = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(line_no, "bad interval count"))?;
                    if intervals.len() < k {
                        intervals.resize_with(k, Vec::new);
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let mut int_field = |name: &str| -> Result<u64> {
                fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| Error::parse(line_no, format!("missing or bad {name}")))
            };
            let interval = int_field("interval")? as usize;
            let id = int_field("query id")? as u32;
            let rep = int_field("rep id")? as u32;
            let mut bounds = Vec::new();
            for f in fields {
                let parts: Vec<&str> = f.split(',').collect();
                let [c, lo, hi] = parts[..] else {
                    return Err(Error::parse(line_no, format!("bad bound `{f}`")));
                };
                let parse_f = |s: &str| -> Result<f64> {
                    s.parse().map_err(|_| Error::parse(line_no, format!("bad number `{s}`")))
                };
                bounds.push(Bound {
                    col: c
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad column `{c}`")))?,
                    lo: parse_f(lo)?,
                    hi: parse_f(hi)?,
                });
            }
            let query =
                Query::new(id, bounds).map_err(|e| Error::parse(line_no, e.to_string()))?;
            if intervals.len() <= interval {
                intervals.resize_with(interval + 1, Vec::new);
            }
            intervals[interval].push(TimedQuery { rep, query });
        }
        Ok(Self { intervals })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn build_timed(reps: &[Query], curves: &ArrivalCurve, skew: f64, seed: u64) -> TimedWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_id = 0u32;
    let intervals = (0..curves.intervals())
        .map(|t| {
            let mut iv = Vec::new();
            for (r, q) in reps.iter().enumerate() {
                for _ in 0..curves.series[r][t] {
                    let query = perturb_with(q, skew, &mut rng).with_id(next_id);
                    next_id += 1;
                    iv.push(TimedQuery {
                        rep: q.id,
                        query,
                    });
                }
            }
            iv
        })
        .collect();
    TimedWorkload { intervals }
}

/// Interval `i` of each workload holds `curves[r][i]` perturbed copies of
/// representative `r`. Train and test draw noise from distinct streams.
pub fn assemble(reps: &[Query], curves: &ArrivalCurve, skew: f64, seed: u64) -> Result<(TimedWorkload, TimedWorkload)> {
    if curves.series.len() != reps.len() {
        return Err(Error::Config(format!(
            "{} curves for {} representatives",
            curves.series.len(),
            reps.len()
        )));
    }
    let train = build_timed(reps, curves, skew, mix(seed, 1));
    let test = build_timed(reps, curves, skew, mix(seed, 2));
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Schema;

    fn uniform_table(n: usize, d: usize, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
        Table::new(Schema::numeric(d), data).unwrap()
    }

    fn q(col: usize, lo: f64, hi: f64) -> Query {
        Query::new(0, vec![Bound { col, lo, hi }]).unwrap()
    }

    #[test]
    fn full_width_covers_domain() {
        let t = uniform_table(50, 3, 1);
        let qs = gen_representative(&t, 1, &GenConfig::all_columns(3, 1.0), 5).unwrap();
        assert_eq!(qs[0].bounds().len(), 3);
        assert!(t.rows().all(|r| qs[0].matches(r)));
        assert!(qs[0].matches(&[0.0, 1.0, 0.0]));
    }

    #[test]
    fn generation_is_deterministic() {
        let t = uniform_table(100, 4, 2);
        let a = gen_representative(&t, 2, &GenConfig::default(), 11).unwrap();
        let b = gen_representative(&t, 2, &GenConfig::default(), 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|q| (1..=3).contains(&q.bounds().len())));
    }

    #[test]
    fn empty_table_rejected() {
        let t = Table::new(Schema::numeric(2), vec![]).unwrap();
        assert!(matches!(
            gen_representative(&t, 1, &GenConfig::default(), 0),
            Err(Error::EmptyTable)
        ));
    }

    #[test]
    fn selectivity_tracks_width() {
        let t = uniform_table(20_000, 2, 3);
        let qs = gen_representative(&t, 100, &GenConfig::all_columns(2, 0.1), 4).unwrap();
        let mean = qs
            .iter()
            .map(|q| t.rows().filter(|r| q.matches(r)).count() as f64 / t.len() as f64)
            .sum::<f64>()
            / qs.len() as f64;
        assert!((0.005..=0.015).contains(&mean), "mean selectivity {mean}");
    }

    #[test]
    fn flat_and_single_interval_curves() {
        let reps = vec![q(0, 0.1, 0.2); 3];
        let flat = gen_arrival_curves(&reps, 10, 0.0, 1);
        for s in &flat.series {
            assert!(s.iter().all(|&v| v == s[0]) && s[0] >= 1);
        }
        let one = gen_arrival_curves(&reps, 1, 0.7, 1);
        assert_eq!(one.intervals(), 1);
        assert_eq!(one.series.len(), 3);
        assert_eq!(gen_arrival_curves(&reps, 12, 0.5, 9), gen_arrival_curves(&reps, 12, 0.5, 9));
        assert!(gen_arrival_curves(&reps, 12, 3.0, 2).total() > 0);
    }

    #[test]
    fn perturbation_bounds() {
        let base = q(0, 0.4, 0.6);
        assert_eq!(perturb_query(&base, 0.0, 3), base);
        for seed in 0..200 {
            let p = perturb_query(&base, 1.0, seed);
            let b = p.bounds()[0];
            assert!(0.0 <= b.lo && b.lo < b.hi && b.hi <= 1.0);
            let p = perturb_query(&base, 0.1, seed);
            let b = p.bounds()[0];
            assert!((b.lo - 0.4).abs() <= 0.02 + 1e-12 && (b.hi - 0.6).abs() <= 0.02 + 1e-12);
        }
    }

    #[test]
    fn assemble_counts() {
        let one = vec![q(0, 0.1, 0.3)];
        let (train, test) = assemble(&one, &ArrivalCurve { series: vec![vec![2, 0, 1]] }, 0.05, 1).unwrap();
        assert_eq!(train.interval_sizes(), vec![2, 0, 1]);
        assert_eq!(test.interval_sizes(), vec![2, 0, 1]);
        assert_ne!(train, test);

        let two = vec![q(0, 0.1, 0.3), q(1, 0.5, 0.7)];
        let curves = ArrivalCurve { series: vec![vec![1, 0], vec![0, 3]] };
        let (train, test) = assemble(&two, &curves, 0.0, 7).unwrap();
        assert_eq!(train.interval_sizes(), vec![1, 3]);
        let boxes = |w: &TimedWorkload| -> Vec<Vec<Bound>> { w.queries().map(|q| q.bounds().to_vec()).collect() };
        assert_eq!(boxes(&train), boxes(&test));
        assert_eq!(train.len() as u64, curves.total());
        assert!(train.intervals[1].iter().all(|t| t.rep == 0 || t.rep == two[1].id));
    }

    #[test]
    fn file_round_trip() {
        let t = uniform_table(200, 3, 5);
        let reps = gen_representative(&t, 10, &GenConfig::default(), 1).unwrap();
        let curves = gen_arrival_curves(&reps, 6, 0.5, 2);
        let (train, _) = assemble(&reps, &curves, 0.05, 3).unwrap();
        let parsed = TimedWorkload::parse(&train.to_text()).unwrap();
        assert_eq!(parsed, train);
    }

    #[test]
    fn trailing_empty_intervals_survive() {
        let w = TimedWorkload { intervals: vec![vec![], vec![], vec![]] };
        assert_eq!(TimedWorkload::parse(&w.to_text()).unwrap().intervals.len(), 3);
    }

    #[test]
    fn parse_errors_name_line() {
        let text = "# intervals=1\n0 0 0 0,0.1,0.2\n0 1 0 0,0.5,0.2\n";
        assert!(matches!(TimedWorkload::parse(text), Err(Error::Parse { line: 3, .. })));
    }
}
