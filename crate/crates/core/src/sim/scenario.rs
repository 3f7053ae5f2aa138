use serde::{Deserialize, Serialize};

use super::harness::{run_cloud_edge, run_three_tier, RunSeries, Setting, SimConfig, Traces};
use super::synth::{clustered_table, SynthConfig};
use crate::error::Result;
use crate::layout::{build_layout, Layout, LayoutConfig, Method};
use crate::types::{Query, Table};
use crate::util::mix;
use crate::workload::{assemble, gen_arrival_curves, gen_representative, ArrivalCurve, GenConfig, TimedWorkload};

/// Seed handed to `build_layout` by a scenario with seed `seed`.
pub fn layout_seed(seed: u64) -> u64 {
    mix(seed, 5)
}

/// A synthetic table plus train/test workloads, fully determined by `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub table: SynthConfig,
    pub workload: GenConfig,
    pub representatives: usize,
    pub intervals: usize,
    pub burstiness: f64,
    pub skew: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            table: SynthConfig::default(),
            workload: GenConfig::default(),
            representatives: 100,
            intervals: 40,
            burstiness: 0.5,
            skew: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub table: Table,
    pub reps: Vec<Query>,
    pub curves: ArrivalCurve,
    pub train: TimedWorkload,
    pub test: TimedWorkload,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        let table = clustered_table(&cfg.table, mix(cfg.seed, 1));
        Self::with_table(table, cfg)
    }

    /// Like `build` but over a given table; `cfg.table` is ignored.
    pub fn with_table(table: Table, cfg: &ScenarioConfig) -> Result<Self> {
        let reps = gen_representative(&table, cfg.representatives, &cfg.workload, mix(cfg.seed, 2))?;
        let curves = gen_arrival_curves(&reps, cfg.intervals, cfg.burstiness, mix(cfg.seed, 3));
        let (train, test) = assemble(&reps, &curves, cfg.skew, mix(cfg.seed, 4))?;
        Ok(Self {
            config: cfg.clone(),
            table,
            reps,
            curves,
            train,
            test,
        })
    }

    /// Wrap an existing table and workloads. `curves` is recovered from the
    /// per-interval representative counts of `train`.
    pub fn from_parts(table: Table, reps: Vec<Query>, train: TimedWorkload, test: TimedWorkload, seed: u64) -> Self {
        let pos: std::collections::HashMap<u32, usize> = reps.iter().enumerate().map(|(i, q)| (q.id, i)).collect();
        let mut series = vec![vec![0u32; train.intervals.len()]; reps.len()];
        for (t, iv) in train.intervals.iter().enumerate() {
            for tq in iv {
                if let Some(&r) = pos.get(&tq.rep) {
                    series[r][t] += 1;
                }
            }
        }
        Self {
            config: ScenarioConfig {
                representatives: reps.len(),
                intervals: train.intervals.len(),
                seed,
                ..Default::default()
            },
            table,
            reps,
            curves: ArrivalCurve { series },
            train,
            test,
        }
    }

    /// Layouts are built from the representative queries.
    pub fn layout(&self, method: Method, cfg: &LayoutConfig) -> Result<Layout> {
        build_layout(&self.table, method, &self.reps, cfg, layout_seed(self.config.seed))
    }

    /// Build the layout for `method` and run every requested setting on it.
    pub fn evaluate(
        &self,
        method: Method,
        layout: &LayoutConfig,
        sim: &SimConfig,
        settings: &[Setting],
    ) -> Result<(Layout, Vec<RunSeries>)> {
        let l = self.layout(method, layout)?;
        let train = Traces::new(&self.table, &l.forest, &self.train, sim.leaf_scan_threshold);
        let test = Traces::new(&self.table, &l.forest, &self.test, sim.leaf_scan_threshold);
        let mut out = Vec::new();
        for s in settings {
            out.extend(match s {
                Setting::CloudEdge => run_cloud_edge(&l, &train, &test, sim)?,
                Setting::ThreeTier => run_three_tier(&l, &train, &test, sim)?,
            });
        }
        Ok((l, out))
    }
}
