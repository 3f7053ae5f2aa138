use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tierblock::config::Provenance;
use tierblock::layout::Method;
use tierblock::partition::{PartitionReport, ZoneKind};
use tierblock::sim::{Setting, SummaryRow};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    #[serde(flatten)]
    pub row: SummaryRow,
}

/// Averages over seeds, each seed weighted equally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanRow {
    pub method: Method,
    pub setting: Setting,
    pub budget_or_capacity: f64,
    pub thr: Option<f64>,
    pub bhr: Option<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub kind: String,
    pub provenance: Provenance,
    pub rows: Vec<SeedRow>,
    pub means: Vec<MeanRow>,
}

impl SummaryFile {
    pub fn new(provenance: Provenance, rows: Vec<SeedRow>) -> Self {
        let mut groups: BTreeMap<(usize, usize, u64), Vec<&SummaryRow>> = BTreeMap::new();
        let mut order = Vec::new();
        for r in &rows {
            let key = (
                method_rank(r.row.method),
                setting_rank(r.row.setting),
                r.row.budget_or_capacity.to_bits(),
            );
            if !groups.contains_key(&key) {
                order.push(key);
            }
            groups.entry(key).or_default().push(&r.row);
        }
        let means = order
            .iter()
            .map(|k| {
                let g = &groups[k];
                MeanRow {
                    method: g[0].method,
                    setting: g[0].setting,
                    budget_or_capacity: g[0].budget_or_capacity,
                    thr: mean(g.iter().map(|r| r.thr)),
                    bhr: mean(g.iter().map(|r| r.bhr)),
                    seeds: g.len(),
                }
            })
            .collect();
        Self {
            kind: "summary".into(),
            provenance,
            rows,
            means,
        }
    }
}

fn method_rank(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

fn setting_rank(s: Setting) -> usize {
    match s {
        Setting::CloudEdge => 0,
        Setting::ThreeTier => 1,
    }
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockStats {
    pub count: usize,
    pub min_rows: usize,
    pub max_rows: usize,
    pub mean_rows: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionFile {
    pub kind: String,
    pub provenance: Provenance,
    pub method: Method,
    pub block_size: usize,
    pub rows: u64,
    pub blocks: BlockStats,
    /// Workload-aware methods only.
    pub partition: Option<PartitionReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchEntry {
    pub method: Method,
    pub total_ms: f64,
    pub blocks: usize,
    pub repetitions: usize,
    pub phases_ms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchFile {
    pub kind: String,
    pub provenance: Provenance,
    pub rows: usize,
    pub entries: Vec<BenchEntry>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

pub fn format_summary(s: &SummaryFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:<11} {:>7} {:>7} {:>7} {:>5}", "method", "setting", "level", "thr", "bhr", "seeds");
    for m in &s.means {
        let _ = writeln!(
            out,
            "{:<10} {:<11} {:>6.1}% {:>7} {:>7} {:>5}",
            m.method.to_string(),
            m.setting.to_string(),
            m.budget_or_capacity * 100.0,
            fmt_opt(m.thr),
            fmt_opt(m.bhr),
            m.seeds
        );
    }
    out
}

pub fn format_partition(p: &PartitionFile) -> String {
    let mut out = String::new();
    let b = &p.blocks;
    let _ = writeln!(out, "method {}, block_size {}, {} rows", p.method, p.block_size, p.rows);
    let _ = writeln!(
        out,
        "{} blocks, rows per block min {} / mean {:.1} / max {}",
        b.count, b.min_rows, b.mean_rows, b.max_rows
    );
    if let Some(r) = &p.partition {
        let _ = writeln!(
            out,
            "{} filter, page_size {}, freq_limit {}: {} pages ({} hot, {} cold), {} hot rows, {} cold rows",
            r.filter, r.page_size, r.freq_limit, r.pages, r.hot_pages, r.cold_pages, r.hot_rows, r.cold_rows
        );
        let _ = writeln!(out, "hot sub-tables (rows): {:?}", r.subtables);
        if !r.zones.is_empty() {
            let hot = r.zones.iter().filter(|z| z.kind == ZoneKind::Hot).count();
            let _ = writeln!(out, "{} zones, {} hot", r.zones.len(), hot);
        }
    }
    out
}

pub fn format_bench(b: &BenchFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} rows, fastest of {} runs", b.rows, b.entries.first().map_or(0, |e| e.repetitions));
    let _ = writeln!(out, "{:<10} {:>10} {:>7}  phases (ms)", "method", "total ms", "blocks");
    for e in &b.entries {
        let phases: Vec<String> = e.phases_ms.iter().map(|(n, ms)| format!("{n} {ms:.1}")).collect();
        let _ = writeln!(
            out,
            "{:<10} {:>10.1} {:>7}  {}",
            e.method.to_string(),
            e.total_ms,
            e.blocks,
            phases.join(", ")
        );
    }
    out
}

/// Interval-averaged thr/bhr per (method, setting, level) from a metrics CSV.
pub fn format_metrics_csv(text: &str) -> Result<String, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or("empty metrics file")?;
    let cols: Vec<&str> = header.split(',').collect();
    let idx = |name: &str| cols.iter().position(|c| *c == name).ok_or(format!("missing column `{name}`"));
    let (mi, si, li, ti, bi) = (idx("method")?, idx("setting")?, idx("budget_or_capacity")?, idx("thr")?, idx("bhr")?);
    // (method, setting, level) -> thr values, bhr values
    type Group = ((String, String, String), Vec<f64>, Vec<f64>);
    let mut groups: Vec<Group> = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(format!("row {}: expected {} fields", n + 1, cols.len()));
        }
        let key = (f[mi].to_string(), f[si].to_string(), f[li].to_string());
        let pos = match groups.iter().position(|g| g.0 == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new(), Vec::new()));
                groups.len() - 1
            }
        };
        let num = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("row {}: bad number `{s}`", n + 1))
            }
        };
        groups[pos].1.extend(num(f[ti])?);
        groups[pos].2.extend(num(f[bi])?);
    }
    let avg = |v: &[f64]| mean(v.iter().map(|&x| Some(x)));
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:<11} {:>7} {:>7} {:>7}  (interval means)", "method", "setting", "level", "thr", "bhr");
    for ((m, s, l), t, b) in &groups {
        let _ = writeln!(out, "{m:<10} {s:<11} {l:>7} {:>7} {:>7}", fmt_opt(avg(t)), fmt_opt(avg(b)));
    }
    Ok(out)
}

fn report_one(path: &Path) -> CliResult<String> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Usage(format!("{}: no such file", path.display()))
        } else {
            CliError::Input {
                path: path.into(),
                source: e.into(),
            }
        }
    })?;
    let bad = |msg: String| CliError::Data { path: path.into(), msg };
    if path.extension().is_some_and(|e| e == "csv") {
        return format_metrics_csv(&text).map_err(bad);
    }
    let json = |e: serde_json::Error| CliError::Input {
        path: path.into(),
        source: e.into(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json)?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("summary") => Ok(format_summary(&serde_json::from_value(value).map_err(json)?)),
        Some("partition") => Ok(format_partition(&serde_json::from_value(value).map_err(json)?)),
        Some("bench") => Ok(format_bench(&serde_json::from_value(value).map_err(json)?)),
        other => Err(bad(format!("unrecognized report kind {other:?}"))),
    }
}

pub fn report(files: &[PathBuf]) -> CliResult<()> {
    for (i, f) in files.iter().enumerate() {
        let body = report_one(f)?;
        if i > 0 {
            println!();
        }
        println!("== {}", f.display());
        print!("{body}");
    }
    Ok(())
}
