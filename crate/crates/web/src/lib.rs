//! Browser demo: build block layouts over a small 2-d synthetic table,
//! route rectangle queries through them and run a cloud/edge simulation.
//!
//! Everything crosses the JS boundary as JSON strings or flat float arrays.

use serde::Serialize;
use tierblock::config::ExperimentConfig;
use tierblock::layout::{Layout, Method};
use tierblock::partition::PartitionReport;
use tierblock::sim::{Scenario, Setting};
use tierblock::types::{Bound, Query};
use wasm_bindgen::prelude::*;

/// Small enough to rebuild in well under a second in the browser.
const DEMO_DEFAULTS: &[(&str, &str)] = &[
    ("rows", "20000"),
    ("dims", "2"),
    ("clusters", "6"),
    ("block_size", "256"),
    ("representatives", "30"),
    ("intervals", "8"),
    ("width_min", "0.02"),
    ("width_max", "0.08"),
];

#[derive(Debug)]
pub struct DemoError(String);

impl std::fmt::Display for DemoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<tierblock::Error> for DemoError {
    fn from(e: tierblock::Error) -> Self {
        DemoError(e.to_string())
    }
}

impl From<DemoError> for JsValue {
    fn from(e: DemoError) -> Self {
        JsError::new(&e.0).into()
    }
}

type DemoResult<T> = Result<T, DemoError>;

#[derive(Debug, Serialize)]
pub struct BlockBox {
    pub id: u32,
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub rows: usize,
}

#[derive(Debug, Serialize)]
pub struct BuildInfo {
    pub method: Method,
    pub build_ms: f64,
    pub blocks: Vec<BlockBox>,
    pub partition: Option<PartitionReport>,
}

#[derive(Debug, Serialize)]
pub struct QueryInfo {
    pub blocks: Vec<u32>,
    pub rows_read: u64,
    pub matches: u64,
    pub table_rows: usize,
}

#[derive(Debug, Serialize)]
pub struct SimPoint {
    pub budget: f64,
    pub thr: Option<f64>,
    pub bhr: Option<f64>,
}

fn parse_method(name: &str) -> DemoResult<Method> {
    name.parse().map_err(|_| DemoError(format!("unknown method `{name}`")))
}

#[wasm_bindgen]
pub struct Demo {
    cfg: ExperimentConfig,
    scenario: Scenario,
    layout: Option<Layout>,
}

impl Demo {
    /// `overrides` holds `key = value` lines on top of the demo defaults.
    pub fn open(overrides: &str, seed: u64) -> DemoResult<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in DEMO_DEFAULTS {
            cfg.set(k, v)?;
        }
        for line in overrides.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DemoError(format!("expected `key = value`, got `{line}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        if cfg.dims != 2 {
            return Err(DemoError("the demo draws two columns; keep dims = 2".into()));
        }
        let scenario = Scenario::build(&cfg.scenario_config(seed))?;
        Ok(Self {
            cfg,
            scenario,
            layout: None,
        })
    }

    pub fn build_layout(&mut self, method: &str) -> DemoResult<BuildInfo> {
        let m = parse_method(method)?;
        let l = self.scenario.layout(m, &self.cfg.layout_config(m))?;
        let info = BuildInfo {
            method: m,
            build_ms: l.total.as_secs_f64() * 1e3,
            blocks: l
                .forest
                .blocks()
                .iter()
                .map(|b| BlockBox {
                    id: b.id,
                    min: [b.mbr.min[0], b.mbr.min[1]],
                    max: [b.mbr.max[0], b.mbr.max[1]],
                    rows: b.size(),
                })
                .collect(),
            partition: l.partition.clone(),
        };
        self.layout = Some(l);
        Ok(info)
    }

    pub fn run_query(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> DemoResult<QueryInfo> {
        let l = self.layout.as_ref().ok_or_else(|| DemoError("build a layout first".into()))?;
        let q = Query::new(
            0,
            vec![
                Bound {
                    col: 0,
                    lo: x0.min(x1),
                    hi: x0.max(x1),
                },
                Bound {
                    col: 1,
                    lo: y0.min(y1),
                    hi: y0.max(y1),
                },
            ],
        )?;
        let t = l.forest.trace(&self.scenario.table, &q, self.cfg.leaf_scan_threshold);
        let mut rows_read = 0;
        for &b in &t.blocks {
            rows_read += l.forest.block(b)?.size() as u64;
        }
        Ok(QueryInfo {
            matches: t.satisfying(),
            blocks: t.blocks,
            rows_read,
            table_rows: self.scenario.table.len(),
        })
    }

    /// Mean test THR/BHR per edge budget, cloud-edge setting.
    pub fn run_simulation(&self, method: &str) -> DemoResult<Vec<SimPoint>> {
        let m = parse_method(method)?;
        let (_, runs) = self.scenario.evaluate(
            m,
            &self.cfg.layout_config(m),
            &self.cfg.sim_config(),
            &[Setting::CloudEdge],
        )?;
        Ok(runs
            .iter()
            .map(|r| SimPoint {
                budget: r.level,
                thr: r.mean_thr(),
                bhr: r.mean_bhr(),
            })
            .collect())
    }

    /// Up to `limit` points as x0,y0,x1,y1,.. evenly strided over the table.
    pub fn sample_points(&self, limit: usize) -> Vec<f64> {
        let t = &self.scenario.table;
        let step = t.len().div_ceil(limit.max(1)).max(1);
        t.rows().step_by(step).flat_map(|r| [r[0], r[1]]).collect()
    }
}

fn to_json<T: Serialize>(v: &T) -> DemoResult<String> {
    serde_json::to_string(v).map_err(|e| DemoError(e.to_string()))
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(overrides: &str, seed: u32) -> Result<Demo, JsValue> {
        Ok(Demo::open(overrides, seed as u64)?)
    }

    pub fn rows(&self) -> usize {
        self.scenario.table.len()
    }

    pub fn points(&self, limit: usize) -> Vec<f64> {
        self.sample_points(limit)
    }

    /// JSON `BuildInfo`.
    pub fn build(&mut self, method: &str) -> Result<String, JsValue> {
        Ok(to_json(&self.build_layout(method)?)?)
    }

    /// JSON `QueryInfo` for the rectangle against the last built layout.
    pub fn query(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<String, JsValue> {
        Ok(to_json(&self.run_query(x0, y0, x1, y1)?)?)
    }

    /// JSON list of `SimPoint`.
    pub fn simulate(&self, method: &str) -> Result<String, JsValue> {
        Ok(to_json(&self.run_simulation(method)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Demo {
        Demo::open("rows = 4000\nintervals = 3\nrepresentatives = 10", 1).unwrap()
    }

    #[test]
    fn query_reads_every_match() {
        let mut d = small();
        assert!(d.run_query(0.0, 0.0, 1.0, 1.0).is_err());
        for m in ["kdtree", "brame-s"] {
            let info = d.build_layout(m).unwrap();
            assert_eq!(info.blocks.iter().map(|b| b.rows).sum::<usize>(), 4000);
            let q = d.run_query(0.6, 0.6, 0.2, 0.2).unwrap();
            let scan = d
                .scenario
                .table
                .rows()
                .filter(|r| r[..2].iter().all(|&v| 0.2 < v && v < 0.6))
                .count();
            assert_eq!(q.matches, scan as u64, "{m}");
            assert!(q.rows_read >= q.matches);
        }
    }

    #[test]
    fn simulate_reports_each_budget() {
        let d = small();
        let pts = d.run_simulation("key-order").unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.thr.is_none_or(|t| (0.0..=1.0).contains(&t))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Demo::open("dims = 3", 0).is_err());
        assert!(Demo::open("nonsense", 0).is_err());
        assert!(small().run_simulation("btree").is_err());
        assert_eq!(small().sample_points(100).len(), 200);
    }
}
