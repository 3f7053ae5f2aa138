use serde::{Deserialize, Serialize};

use crate::cache::{CacheRun, FetchTally, Policy};
use crate::error::Result;
use crate::layout::{Layout, Method};
use crate::router::{QueryTrace, RoutingForest, DEFAULT_LEAF_SCAN_THRESHOLD};
use crate::scheduler::{drive_traces, migrate_traces, SchedulerConfig, Solver, DEFAULT_GAMMA};
use crate::sim::metrics::MetricSample;
use crate::types::{Query, Table};
use crate::util::par_map;
use crate::workload::TimedWorkload;

pub const DEFAULT_BUDGETS: [f64; 4] = [0.04, 0.08, 0.16, 0.32];
pub const DEFAULT_END_CAPACITIES: [f64; 4] = [0.01, 0.02, 0.04, 0.08];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub gamma: f64,
    pub solver: Solver,
    pub leaf_scan_threshold: usize,
    /// Edge budgets as fractions of the table size.
    pub budgets: Vec<f64>,
    /// End-cache capacities as fractions of the table size.
    pub capacities: Vec<f64>,
    /// Edge budget used while sweeping end-cache capacities.
    pub edge_budget: f64,
    pub policy: Policy,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            solver: Solver::Dp,
            leaf_scan_threshold: DEFAULT_LEAF_SCAN_THRESHOLD,
            budgets: DEFAULT_BUDGETS.to_vec(),
            capacities: DEFAULT_END_CAPACITIES.to_vec(),
            edge_budget: 0.08,
            policy: Policy::Lru,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    CloudEdge,
    ThreeTier,
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Setting::CloudEdge => "cloud-edge",
            Setting::ThreeTier => "three-tier",
        })
    }
}

/// Per-interval test metrics for one method at one budget or capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub method: Method,
    pub setting: Setting,
    /// Budget or capacity as a fraction of the table.
    pub level: f64,
    pub samples: Vec<MetricSample>,
    pub fetches: Option<FetchTally>,
}

impl RunSeries {
    /// Mean over all test queries with a defined THR.
    pub fn mean_thr(&self) -> Option<f64> {
        weighted(self.samples.iter().map(|s| (s.thr, s.queries - s.empty_queries)))
    }

    pub fn mean_bhr(&self) -> Option<f64> {
        weighted(self.samples.iter().map(|s| (s.bhr, s.routed_queries)))
    }

    pub fn moved_blocks(&self) -> usize {
        self.samples.iter().map(|s| s.moved_blocks).sum()
    }

    pub fn moved_tuples(&self) -> u64 {
        self.samples.iter().map(|s| s.moved_tuples).sum()
    }
}

fn weighted(it: impl Iterator<Item = (Option<f64>, usize)>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (v, w) in it {
        if let Some(v) = v {
            sum += v * w as f64;
            n += w;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Routed queries of a workload, computed once per layout.
pub struct Traces {
    pub intervals: Vec<Vec<QueryTrace>>,
}

impl Traces {
    pub fn new(table: &Table, forest: &RoutingForest, workload: &TimedWorkload, leaf_scan_threshold: usize) -> Self {
        let intervals = workload
            .intervals
            .iter()
            .map(|iv| {
                let qs: Vec<Query> = iv.iter().map(|t| t.query.clone()).collect();
                forest.trace_all(table, &qs, leaf_scan_threshold)
            })
            .collect();
        Self { intervals }
    }
}

fn budget_tuples(forest: &RoutingForest, fraction: f64) -> u64 {
    (forest.total_rows() as f64 * fraction.max(0.0)).floor() as u64
}

fn scheduler(cfg: &SimConfig, budget: u64) -> SchedulerConfig {
    SchedulerConfig {
        gamma: cfg.gamma,
        budget,
        solver: cfg.solver,
        leaf_scan_threshold: cfg.leaf_scan_threshold,
    }
}

/// Cloud/edge migration per budget: start cold, migrate through the
/// training intervals, then measure the test intervals against the edge
/// set (measure first, migrate after, every interval).
pub fn run_cloud_edge(layout: &Layout, train: &Traces, test: &Traces, cfg: &SimConfig) -> Result<Vec<RunSeries>> {
    let runs = par_map(&cfg.budgets, |&level| -> Result<RunSeries> {
        let mut forest = layout.forest.clone();
        forest.reset();
        let sched = scheduler(cfg, budget_tuples(&forest, level));
        drive_traces(&train.intervals, &mut forest, &sched)?;
        let (samples, _) = drive_traces(&test.intervals, &mut forest, &sched)?;
        Ok(RunSeries {
            method: layout.method,
            setting: Setting::CloudEdge,
            level,
            samples,
            fetches: None,
        })
    });
    runs.into_iter().collect()
}

/// End-cache sweep: cloud/edge migration keeps running at
/// `cfg.edge_budget` while one end device serves every query in arrival
/// order. Hit rates count end-cache residents only.
pub fn run_three_tier(layout: &Layout, train: &Traces, test: &Traces, cfg: &SimConfig) -> Result<Vec<RunSeries>> {
    let runs = par_map(&cfg.capacities, |&level| -> Result<RunSeries> {
        let mut forest = layout.forest.clone();
        forest.reset();
        let sched = scheduler(cfg, budget_tuples(&forest, cfg.edge_budget));
        let mut end = CacheRun::new(cfg.policy, budget_tuples(&forest, level));
        for (i, batch) in train.intervals.iter().enumerate() {
            end.serve_interval(i, batch, &forest);
            migrate_traces(batch, &mut forest, &sched, i)?;
        }
        end.fetches = FetchTally::default();
        let mut samples = Vec::with_capacity(test.intervals.len());
        for (i, batch) in test.intervals.iter().enumerate() {
            let mut s = end.serve_interval(i, batch, &forest);
            let (_, stats) = migrate_traces(batch, &mut forest, &sched, i)?;
            s.moved_blocks = stats.moved_blocks();
            s.moved_tuples = stats.tuples_moved;
            samples.push(s);
        }
        Ok(RunSeries {
            method: layout.method,
            setting: Setting::ThreeTier,
            level,
            samples,
            fetches: Some(end.fetches),
        })
    });
    runs.into_iter().collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Metrics CSV, one row per (series, interval). Column order is fixed.
pub fn write_metrics_csv<W: std::io::Write>(out: W, series: &[RunSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "setting", "budget_or_capacity", "interval", "thr", "bhr", "moved_blocks", "moved_tuples"])?;
    for s in series {
        for m in &s.samples {
            w.write_record([
                s.method.to_string(),
                s.setting.to_string(),
                format!("{:.4}", s.level),
                m.interval.to_string(),
                opt(m.thr),
                opt(m.bhr),
                m.moved_blocks.to_string(),
                m.moved_tuples.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub setting: Setting,
    pub budget_or_capacity: f64,
    pub thr: Option<f64>,
    pub bhr: Option<f64>,
    pub queries: usize,
    pub empty_queries: usize,
    pub moved_blocks: usize,
    pub moved_tuples: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fetches: Option<FetchTally>,
}

pub fn summarize(series: &[RunSeries]) -> Vec<SummaryRow> {
    series
        .iter()
        .map(|s| SummaryRow {
            method: s.method,
            setting: s.setting,
            budget_or_capacity: s.level,
            thr: s.mean_thr(),
            bhr: s.mean_bhr(),
            queries: s.samples.iter().map(|m| m.queries).sum(),
            empty_queries: s.samples.iter().map(|m| m.empty_queries).sum(),
            moved_blocks: s.moved_blocks(),
            moved_tuples: s.moved_tuples(),
            fetches: s.fetches,
        })
        .collect()
}
