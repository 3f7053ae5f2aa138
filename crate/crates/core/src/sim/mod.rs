//! Hit-rate metrics and the experiment harnesses.

pub mod bench;
pub mod harness;
pub mod metrics;
pub mod scenario;
pub mod synth;

pub use bench::{bench_build, BenchRow};
pub use harness::{
    run_cloud_edge, run_three_tier, summarize, write_metrics_csv, RunSeries, Setting, SimConfig, SummaryRow, Traces,
    DEFAULT_BUDGETS, DEFAULT_END_CAPACITIES,
};
pub use metrics::{bhr, thr, MetricSample, RatioAccumulator};
pub use scenario::{layout_seed, Scenario, ScenarioConfig};
pub use synth::{clustered_table, SynthConfig};
