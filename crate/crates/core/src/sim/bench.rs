use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layout::{build_layout, LayoutConfig, Method};
use crate::types::{Query, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    /// Fastest of the repetitions.
    pub total: Duration,
    /// Phase times of that fastest repetition.
    pub phases: Vec<(String, Duration)>,
    pub blocks: usize,
    pub repetitions: usize,
}

impl BenchRow {
    pub fn phase(&self, name: &str) -> Duration {
        self.phases.iter().filter(|(n, _)| n == name).map(|(_, d)| *d).sum()
    }
}

/// Build each layout `repetitions` times (at least once) and keep the
/// fastest run.
pub fn bench_build(
    table: &Table,
    methods: &[Method],
    workload: &[Query],
    cfg: &LayoutConfig,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(methods.len());
    for &m in methods {
        let mut best: Option<BenchRow> = None;
        for _ in 0..repetitions.max(1) {
            let l = build_layout(table, m, workload, cfg, seed)?;
            if best.as_ref().is_none_or(|b| l.total < b.total) {
                best = Some(BenchRow {
                    method: m,
                    total: l.total,
                    phases: l.phases.iter().map(|(n, d)| (n.to_string(), *d)).collect(),
                    blocks: l.forest.len(),
                    repetitions: repetitions.max(1),
                });
            }
        }
        rows.extend(best);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::synth::{clustered_table, SynthConfig};
    use crate::types::Bound;

    #[test]
    fn phases_fit_inside_total() {
        let t = clustered_table(
            &SynthConfig {
                rows: 4000,
                dims: 3,
                ..Default::default()
            },
            1,
        );
        let w = vec![Query::new(0, vec![Bound { col: 0, lo: 0.2, hi: 0.5 }]).unwrap()];
        let rows = bench_build(&t, &[Method::KeyOrder, Method::BrameS], &w, &LayoutConfig::new(128), 3, 0).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.total > Duration::ZERO);
            let sum: Duration = r.phases.iter().map(|(_, d)| *d).sum();
            assert!(sum <= r.total);
        }
        assert!(rows[1].phase("presegment") > Duration::ZERO);
    }
}
