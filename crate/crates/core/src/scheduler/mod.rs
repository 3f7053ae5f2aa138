//! Block temperature and the periodic cloud/edge migration loop.

mod knapsack;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use knapsack::{
    solve_knapsack, solve_knapsack_dp, solve_knapsack_greedy, KnapsackInstance, KnapsackItem, PlacementPlan, Solver,
    VALUE_SCALE,
};

use crate::error::Result;
use crate::router::{QueryTrace, RoutingForest, DEFAULT_LEAF_SCAN_THRESHOLD};
use crate::sim::metrics::{interval_sample, MetricSample};
use crate::types::{Query, Table, Tier};
use crate::util::Instant;
use crate::workload::TimedWorkload;

pub const DEFAULT_GAMMA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeatState {
    pub heat: f64,
    pub hits: u64,
}

/// Exponential smoothing of per-period hit counts: `gamma` weighs the old
/// heat, `1 - gamma` the hits just observed. Hits are reset.
pub fn update_heat(state: HeatState, gamma: f64) -> HeatState {
    HeatState {
        heat: gamma * state.heat + (1.0 - gamma) * state.hits as f64,
        hits: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub gamma: f64,
    /// Edge capacity in tuples.
    pub budget: u64,
    pub solver: Solver,
    pub leaf_scan_threshold: usize,
}

impl SchedulerConfig {
    pub fn new(budget: u64) -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            budget,
            solver: Solver::Dp,
            leaf_scan_threshold: DEFAULT_LEAF_SCAN_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MigrationStats {
    pub period: usize,
    pub to_edge: usize,
    pub to_cloud: usize,
    pub tuples_moved: u64,
    pub plan_value: f64,
    pub solve_time: Duration,
}

impl MigrationStats {
    pub fn moved_blocks(&self) -> usize {
        self.to_edge + self.to_cloud
    }
}

/// One migration round: count hits for `batch`, refresh heat, re-solve
/// placement and apply it.
pub fn migrate_period(
    batch: &[Query],
    forest: &mut RoutingForest,
    cfg: &SchedulerConfig,
    period: usize,
) -> Result<(PlacementPlan, MigrationStats)> {
    for q in batch {
        for id in forest.route(q, cfg.leaf_scan_threshold) {
            forest.blocks_mut()[id as usize].hits += 1;
        }
    }
    finish_period(forest, cfg, period)
}

/// As [`migrate_period`] with routing already done.
pub fn migrate_traces(
    batch: &[QueryTrace],
    forest: &mut RoutingForest,
    cfg: &SchedulerConfig,
    period: usize,
) -> Result<(PlacementPlan, MigrationStats)> {
    for t in batch {
        for &id in &t.blocks {
            forest.blocks_mut()[id as usize].hits += 1;
        }
    }
    finish_period(forest, cfg, period)
}

fn finish_period(forest: &mut RoutingForest, cfg: &SchedulerConfig, period: usize) -> Result<(PlacementPlan, MigrationStats)> {
    let mut items = Vec::with_capacity(forest.len());
    for b in forest.blocks_mut() {
        let s = update_heat(HeatState { heat: b.heat, hits: b.hits }, cfg.gamma);
        b.heat = s.heat;
        b.hits = s.hits;
        items.push(KnapsackItem {
            id: b.id,
            size: b.size() as u64,
            value: b.heat,
        });
    }
    let before: Vec<Tier> = forest.blocks().iter().map(|b| b.placement).collect();

    let started = Instant::now();
    let plan = solve_knapsack(&KnapsackInstance::new(cfg.budget, items), cfg.solver);
    let solve_time = started.elapsed();
    forest.apply_placement(&plan)?;

    let mut stats = MigrationStats {
        period,
        plan_value: plan.value,
        solve_time,
        ..Default::default()
    };
    for (b, old) in forest.blocks().iter().zip(before) {
        if b.placement != old {
            match b.placement {
                Tier::Edge => stats.to_edge += 1,
                _ => stats.to_cloud += 1,
            }
            stats.tuples_moved += b.size() as u64;
        }
    }
    Ok((plan, stats))
}

/// Per interval: measure hit rates against the current edge set, then
/// migrate using that interval's queries.
pub fn period_driver(
    table: &Table,
    workload: &TimedWorkload,
    forest: &mut RoutingForest,
    cfg: &SchedulerConfig,
) -> Result<(Vec<MetricSample>, Vec<MigrationStats>)> {
    let traces: Vec<Vec<QueryTrace>> = workload
        .intervals
        .iter()
        .map(|iv| {
            let qs: Vec<Query> = iv.iter().map(|t| t.query.clone()).collect();
            forest.trace_all(table, &qs, cfg.leaf_scan_threshold)
        })
        .collect();
    drive_traces(&traces, forest, cfg)
}

pub fn drive_traces(
    intervals: &[Vec<QueryTrace>],
    forest: &mut RoutingForest,
    cfg: &SchedulerConfig,
) -> Result<(Vec<MetricSample>, Vec<MigrationStats>)> {
    let mut samples = Vec::with_capacity(intervals.len());
    let mut log = Vec::with_capacity(intervals.len());
    for (i, batch) in intervals.iter().enumerate() {
        let mut sample = {
            let blocks = forest.blocks();
            interval_sample(i, batch, |id| blocks[id as usize].placement == Tier::Edge)
        };
        let (_, stats) = migrate_traces(batch, forest, cfg, i)?;
        sample.moved_blocks = stats.moved_blocks();
        sample.moved_tuples = stats.tuples_moved;
        samples.push(sample);
        log.push(stats);
    }
    Ok((samples, log))
}

/// Migration log CSV: one row per period.
pub fn write_migration_log<W: std::io::Write>(out: W, log: &[MigrationStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "blocks_to_edge", "blocks_to_cloud", "tuples_moved", "plan_value", "solve_time_us"])?;
    for s in log {
        w.write_record([
            s.period.to_string(),
            s.to_edge.to_string(),
            s.to_cloud.to_string(),
            s.tuples_moved.to_string(),
            format!("{:.6}", s.plan_value),
            s.solve_time.as_micros().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::{FlatIndex, RouteTree};
    use crate::types::{Bound, RowId, Schema};
    use crate::workload::TimedQuery;

    #[test]
    fn heat_examples() {
        assert_eq!(update_heat(HeatState::default(), 0.6).heat, 0.0);
        let s = update_heat(HeatState { heat: 1.0, hits: 5 }, 0.6);
        assert!((s.heat - 2.6).abs() < 1e-12);
        assert_eq!(s.hits, 0);
        assert_eq!(update_heat(HeatState { heat: 3.5, hits: 9 }, 1.0).heat, 3.5);
        assert_eq!(update_heat(HeatState { heat: 3.5, hits: 9 }, 0.0).heat, 9.0);
    }

    #[test]
    fn heat_stays_bounded() {
        let mut s = HeatState { heat: 4.0, hits: 0 };
        for h in [7, 0, 3, 7, 7, 1, 0, 7] {
            s.hits = h;
            s = update_heat(s, 0.6);
            assert!(s.heat >= 0.0 && s.heat <= 7.0 + 1e-12);
        }
    }

    /// 1-d table, 10 blocks of 10 rows each: block i covers [i/10, (i+1)/10).
    fn forest() -> (Table, RoutingForest) {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        let t = Table::from_rows(Schema::numeric(1), &rows).unwrap();
        let order: Vec<RowId> = (0..100).collect();
        let f = RoutingForest::new(&t, vec![RouteTree::Flat(FlatIndex::chunked(&t, &order, 10))]).unwrap();
        (t, f)
    }

    fn q(lo: f64, hi: f64) -> Query {
        Query::new(0, vec![Bound { col: 0, lo, hi }]).unwrap()
    }

    #[test]
    fn empty_batch_selects_nothing_of_value() {
        let (_, mut f) = forest();
        let (plan, _) = migrate_period(&[], &mut f, &SchedulerConfig::new(30), 0).unwrap();
        assert_eq!(plan.value, 0.0);
        assert!(f.blocks().iter().all(|b| b.heat == 0.0));
    }

    #[test]
    fn dominant_block_goes_to_edge() {
        let (_, mut f) = forest();
        let cfg = SchedulerConfig::new(10);
        let batch = vec![q(0.42, 0.48); 4];
        for p in 0..3 {
            migrate_period(&batch, &mut f, &cfg, p).unwrap();
            let hot = &f.blocks()[4];
            assert!(f.blocks().iter().filter(|b| b.id != 4).all(|b| b.heat < hot.heat));
            assert_eq!(f.edge_blocks(), vec![4]);
        }
        f.check_consistency().unwrap();
    }

    #[test]
    fn large_budget_takes_every_hot_block() {
        let (_, mut f) = forest();
        let cfg = SchedulerConfig::new(90);
        let (_, stats) = migrate_period(&[q(0.05, 0.35), q(0.61, 0.72)], &mut f, &cfg, 0).unwrap();
        assert_eq!(f.edge_blocks(), vec![0, 1, 2, 3, 6, 7]);
        assert_eq!(stats.to_edge, 6);
        assert_eq!(stats.tuples_moved, 60);
        // room for everything: idle blocks come along too
        migrate_period(&[], &mut f, &SchedulerConfig::new(100), 1).unwrap();
        assert_eq!(f.edge_blocks().len(), 10);
    }

    #[test]
    fn budget_below_smallest_block() {
        let (_, mut f) = forest();
        migrate_period(&[q(0.0, 1.0)], &mut f, &SchedulerConfig::new(9), 0).unwrap();
        assert!(f.edge_blocks().is_empty());
    }

    #[test]
    fn gamma_zero_tracks_last_hits() {
        let (_, mut f) = forest();
        let cfg = SchedulerConfig {
            gamma: 0.0,
            ..SchedulerConfig::new(20)
        };
        migrate_period(&vec![q(0.05, 0.15); 3], &mut f, &cfg, 0).unwrap();
        migrate_period(&[q(0.55, 0.58)], &mut f, &cfg, 1).unwrap();
        assert_eq!(f.blocks()[0].heat, 0.0);
        assert_eq!(f.blocks()[5].heat, 1.0);
    }

    fn timed(intervals: Vec<Vec<Query>>) -> TimedWorkload {
        TimedWorkload {
            intervals: intervals
                .into_iter()
                .map(|iv| iv.into_iter().map(|query| TimedQuery { rep: 0, query }).collect())
                .collect(),
        }
    }

    #[test]
    fn empty_workload_has_no_samples_to_average() {
        let (t, mut f) = forest();
        let (samples, log) = period_driver(&t, &timed(vec![vec![]]), &mut f, &SchedulerConfig::new(50)).unwrap();
        assert_eq!(samples[0].thr, None);
        assert_eq!(log[0].moved_blocks(), 0);
    }

    #[test]
    fn stationary_workload_converges() {
        let (t, mut f) = forest();
        let iv = vec![q(0.12, 0.28), q(0.51, 0.55), q(0.12, 0.18)];
        let w = timed(vec![iv; 6]);
        let (samples, log) = period_driver(&t, &w, &mut f, &SchedulerConfig::new(30)).unwrap();
        // first interval is measured against an empty edge
        assert_eq!(samples[0].thr, Some(0.0));
        assert!(log[1..].iter().all(|s| s.moved_blocks() == 0));
        assert_eq!(samples[5].thr, Some(1.0));
        assert_eq!(f.edge_blocks(), vec![1, 2, 5]);
    }

    #[test]
    fn capacity_never_exceeded_and_results_unchanged() {
        let (t, mut f) = forest();
        let qs = vec![q(0.0, 0.33), q(0.25, 0.9), q(0.7, 0.71)];
        let before: Vec<_> = qs.iter().map(|x| f.trace(&t, x, 64)).collect();
        for (p, budget) in [35u64, 12, 60, 0].into_iter().enumerate() {
            migrate_period(&qs, &mut f, &SchedulerConfig::new(budget), p).unwrap();
            let used: usize = f.blocks().iter().filter(|b| b.placement == Tier::Edge).map(|b| b.size()).sum();
            assert!(used as u64 <= budget);
        }
        let after: Vec<_> = qs.iter().map(|x| f.trace(&t, x, 64)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn migration_log_columns() {
        let mut buf = Vec::new();
        write_migration_log(&mut buf, &[MigrationStats::default()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("period,blocks_to_edge,blocks_to_cloud,tuples_moved,plan_value,solve_time_us\n0,0,0,0,"));
    }
}
