//! Experiment configuration: flat `key = value` lines, optionally grouped
//! under `[section]` headers, `#` comments. Section names are free-form
//! labels; every key is global and may appear once.
//!
//! Lists are comma separated. Fractions (`budgets`, `capacities`,
//! `edge_budget`) are shares of the table's tuple count.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::Policy;
use crate::error::{Error, Result};
use crate::layout::{LayoutConfig, Method};
use crate::partition::FilterMode;
use crate::router::DEFAULT_LEAF_SCAN_THRESHOLD;
use crate::scheduler::{Solver, DEFAULT_GAMMA};
use crate::sim::{ScenarioConfig, SimConfig, SynthConfig, DEFAULT_BUDGETS, DEFAULT_END_CAPACITIES};
use crate::workload::GenConfig;

/// Every accepted key, in the order `to_text` writes them.
pub const KEYS: &[&str] = &[
    "block_size",
    "page_size",
    "phi",
    "freq_limit",
    "size_threshold",
    "filter",
    "method",
    "gamma",
    "solver",
    "budgets",
    "edge_budget",
    "policy",
    "capacities",
    "leaf_scan_threshold",
    "seeds",
    "rows",
    "dims",
    "clusters",
    "representatives",
    "intervals",
    "burstiness",
    "skew",
    "min_preds",
    "max_preds",
    "width_min",
    "width_max",
];

/// Where an output came from. Carries no timestamps so reruns stay
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// sha256 of the canonical config text.
    pub config_sha256: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    /// `# key: value` lines for text outputs.
    pub fn comment_lines(&self) -> String {
        let seeds = join(&self.seeds);
        format!(
            "# {} {} {}\n# config_sha256: {}\n# seeds: {seeds}\n",
            self.tool, self.version, self.command, self.config_sha256
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub block_size: usize,
    /// Defaults to a quarter of `block_size`.
    pub page_size: Option<usize>,
    pub phi: f64,
    pub freq_limit: u32,
    pub size_threshold: usize,
    pub filter: FilterMode,
    pub methods: Vec<Method>,
    pub gamma: f64,
    pub solver: Solver,
    pub budgets: Vec<f64>,
    pub edge_budget: f64,
    pub policy: Policy,
    pub capacities: Vec<f64>,
    pub leaf_scan_threshold: usize,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub dims: usize,
    pub clusters: usize,
    pub representatives: usize,
    pub intervals: usize,
    pub burstiness: f64,
    pub skew: f64,
    pub min_preds: usize,
    pub max_preds: usize,
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let scn = ScenarioConfig::default();
        let gen = GenConfig::default();
        let sim = SimConfig::default();
        Self {
            block_size: 2048,
            page_size: None,
            phi: crate::reorg::HbcConfig::default().phi,
            freq_limit: 1,
            size_threshold: 2,
            filter: FilterMode::Soft,
            methods: vec![Method::KeyOrder, Method::KdTree, Method::Curve, Method::BrameH, Method::BrameS],
            gamma: DEFAULT_GAMMA,
            solver: Solver::Dp,
            budgets: DEFAULT_BUDGETS.to_vec(),
            edge_budget: sim.edge_budget,
            policy: Policy::Lru,
            capacities: DEFAULT_END_CAPACITIES.to_vec(),
            leaf_scan_threshold: DEFAULT_LEAF_SCAN_THRESHOLD,
            seeds: vec![0],
            rows: synth.rows,
            dims: synth.dims,
            clusters: synth.clusters,
            representatives: scn.representatives,
            intervals: scn.intervals,
            burstiness: scn.burstiness,
            skew: scn.skew,
            min_preds: gen.min_preds,
            max_preds: gen.max_preds,
            width_min: gen.width_min,
            width_max: gen.width_max,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("{key} = {v}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn fraction(key: &str, x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::Config(format!("{key}: {x} is not a fraction in [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::parse(i + 1, format!("duplicate key `{k}`")));
            }
            cfg.set(k, v.trim()).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "block_size" => self.block_size = parse(key, v)?,
            "page_size" => self.page_size = Some(parse(key, v)?),
            "phi" => self.phi = parse(key, v)?,
            "freq_limit" => self.freq_limit = parse(key, v)?,
            "size_threshold" => self.size_threshold = parse(key, v)?,
            "filter" => self.filter = parse(key, v)?,
            "method" => self.methods = parse_list(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "solver" => self.solver = parse(key, v)?,
            "budgets" => self.budgets = parse_list(key, v)?,
            "edge_budget" => self.edge_budget = parse(key, v)?,
            "policy" => self.policy = parse(key, v)?,
            "capacities" => self.capacities = parse_list(key, v)?,
            "leaf_scan_threshold" => self.leaf_scan_threshold = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "rows" => self.rows = parse(key, v)?,
            "dims" => self.dims = parse(key, v)?,
            "clusters" => self.clusters = parse(key, v)?,
            "representatives" => self.representatives = parse(key, v)?,
            "intervals" => self.intervals = parse(key, v)?,
            "burstiness" => self.burstiness = parse(key, v)?,
            "skew" => self.skew = parse(key, v)?,
            "min_preds" => self.min_preds = parse(key, v)?,
            "max_preds" => self.max_preds = parse(key, v)?,
            "width_min" => self.width_min = parse(key, v)?,
            "width_max" => self.width_max = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.block_size == 0 {
            return bad("block_size must be at least 1".into());
        }
        if self.page_size == Some(0) {
            return bad("page_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(self.phi >= 0.0) {
            return bad(format!("phi {} must be non-negative", self.phi));
        }
        for &b in self.budgets.iter().chain(&self.capacities) {
            fraction("budgets/capacities", b)?;
        }
        fraction("edge_budget", self.edge_budget)?;
        fraction("skew", self.skew)?;
        if self.rows == 0 || self.dims == 0 || self.representatives == 0 || self.intervals == 0 {
            return bad("rows, dims, representatives and intervals must be at least 1".into());
        }
        if self.min_preds == 0 || self.min_preds > self.max_preds {
            return bad(format!("predicate range {}..={} is empty", self.min_preds, self.max_preds));
        }
        if !(0.0 < self.width_min && self.width_min <= self.width_max && self.width_max <= 1.0) {
            return bad(format!("widths need 0 < width_min <= width_max <= 1, got {} and {}", self.width_min, self.width_max));
        }
        if self.burstiness < 0.0 {
            return bad("burstiness must be non-negative".into());
        }
        Ok(())
    }

    /// Canonical text: every key in `KEYS` order. Parsing it gives back
    /// the same config, and it is what provenance hashes cover.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("block_size", self.block_size.to_string());
        if let Some(p) = self.page_size {
            put("page_size", p.to_string());
        }
        put("phi", self.phi.to_string());
        put("freq_limit", self.freq_limit.to_string());
        put("size_threshold", self.size_threshold.to_string());
        put("filter", self.filter.to_string());
        put("method", join(&self.methods));
        put("gamma", self.gamma.to_string());
        put("solver", self.solver.to_string());
        put("budgets", join(&self.budgets));
        put("edge_budget", self.edge_budget.to_string());
        put("policy", self.policy.to_string());
        put("capacities", join(&self.capacities));
        put("leaf_scan_threshold", self.leaf_scan_threshold.to_string());
        put("seeds", join(&self.seeds));
        put("rows", self.rows.to_string());
        put("dims", self.dims.to_string());
        put("clusters", self.clusters.to_string());
        put("representatives", self.representatives.to_string());
        put("intervals", self.intervals.to_string());
        put("burstiness", self.burstiness.to_string());
        put("skew", self.skew.to_string());
        put("min_preds", self.min_preds.to_string());
        put("max_preds", self.max_preds.to_string());
        put("width_min", self.width_min.to_string());
        put("width_max", self.width_max.to_string());
        s
    }

    /// Layout settings. The filter mode follows the method for the two
    /// Brame variants and `filter` otherwise.
    pub fn layout_config(&self, method: Method) -> LayoutConfig {
        let mut l = LayoutConfig::new(self.block_size);
        if let Some(p) = self.page_size {
            l.partition.page_size = p;
        }
        l.partition.freq_limit = self.freq_limit;
        l.partition.size_threshold = self.size_threshold;
        l.partition.filter = match method {
            Method::BrameH => FilterMode::Hard,
            Method::BrameS => FilterMode::Soft,
            _ => self.filter,
        };
        l.hbc.phi = self.phi;
        l
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            gamma: self.gamma,
            solver: self.solver,
            leaf_scan_threshold: self.leaf_scan_threshold,
            budgets: self.budgets.clone(),
            capacities: self.capacities.clone(),
            edge_budget: self.edge_budget,
            policy: self.policy,
        }
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            min_preds: self.min_preds,
            max_preds: self.max_preds,
            width_min: self.width_min,
            width_max: self.width_max,
        }
    }

    pub fn scenario_config(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            table: SynthConfig {
                rows: self.rows,
                dims: self.dims,
                clusters: self.clusters,
                ..SynthConfig::default()
            },
            workload: self.gen_config(),
            representatives: self.representatives,
            intervals: self.intervals,
            burstiness: self.burstiness,
            skew: self.skew,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
        assert_eq!(d.to_text().lines().count(), KEYS.len() - 1);
    }

    #[test]
    fn parses_sections_comments_and_lists() {
        let text = "\
# run settings
[layout]
block_size = 1024   # smaller blocks
page_size=128
filter = hard
method = brame-s, kdtree

[scheduler]
budgets = 0.1,0.2
solver = greedy
[cache]
policy = arc
seeds = 3, 4
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.block_size, 1024);
        assert_eq!(c.page_size, Some(128));
        assert_eq!(c.filter, FilterMode::Hard);
        assert_eq!(c.methods, vec![Method::BrameS, Method::KdTree]);
        assert_eq!(c.budgets, vec![0.1, 0.2]);
        assert_eq!(c.solver, Solver::Greedy);
        assert_eq!(c.policy, Policy::Arc);
        assert_eq!(c.seeds, vec![3, 4]);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let l = c.layout_config(Method::BrameS);
        assert_eq!((l.block_size, l.partition.page_size), (1024, 128));
        assert_eq!(l.partition.filter, FilterMode::Soft);
        assert_eq!(c.layout_config(Method::KdTree).partition.filter, FilterMode::Hard);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "block_size = 0",
            "nonsense = 1",
            "gamma = 1.5",
            "budgets = 0.1, 2",
            "budgets = ",
            "filter = medium",
            "block_size 12",
            "seeds = 1\nseeds = 2",
            "min_preds = 4\nmax_preds = 2",
            "method = brame-x",
        ] {
            let e = ExperimentConfig::parse(text);
            assert!(e.is_err(), "{text:?} accepted");
        }
        let e = ExperimentConfig::parse("x = 1\nblock_size = q").unwrap_err().to_string();
        assert!(e.starts_with("line 1"), "{e}");
    }
}
