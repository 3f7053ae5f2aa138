use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use tierblock::config::{ExperimentConfig, Provenance};
use tierblock::ingest::{load_table as load_csv, normalize, read_schema_hint, schema_sidecar, write_table, CategoricalDictionary};
use tierblock::layout::{build_layout, Method};
use tierblock::manifest::Manifest;
use tierblock::sim::{bench_build, layout_seed, summarize, write_metrics_csv, Scenario, Setting};
use tierblock::workload::TimedWorkload;
use tierblock::Query;

use crate::error::{CliError, CliResult};
use crate::report::{format_bench, format_partition, format_summary, BenchEntry, BenchFile, BlockStats, PartitionFile, SeedRow, SummaryFile};
use crate::setup::{ensure_dir, load_config, load_table, load_workload, pick_seed, provenance, write_json, write_text};
use crate::{ConfigArgs, Inputs};

#[derive(serde::Serialize)]
struct DictionaryFile<'a> {
    kind: &'static str,
    provenance: &'a Provenance,
    dictionary: &'a CategoricalDictionary,
}

pub fn ingest(input: &Path, schema: &Path, out: &Path) -> CliResult<()> {
    for p in [input, schema] {
        if !p.exists() {
            return Err(CliError::Usage(format!("{}: no such file", p.display())));
        }
    }
    let hint_text = fs::read_to_string(schema).map_err(|e| CliError::Input {
        path: schema.into(),
        source: e.into(),
    })?;
    let hint = read_schema_hint(schema).map_err(CliError::input(schema))?;
    let raw = load_csv(input, &hint).map_err(CliError::input(input))?;
    let (table, dict) = normalize(&raw).map_err(CliError::input(input))?;
    write_table(&table, out)?;

    // ingest has no experiment config; the schema hint plays that role
    let digest = Sha256::digest(hint_text.as_bytes());
    let prov = Provenance {
        tool: "tierblock".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "ingest".into(),
        config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        seeds: Vec::new(),
    };
    let sidecar = schema_sidecar(out);
    let mut text = fs::read_to_string(&sidecar).map_err(CliError::output(&sidecar))?;
    text.push_str(&prov.comment_lines());
    write_text(&sidecar, &text)?;
    let mut dict_path = out.as_os_str().to_owned();
    dict_path.push(".dict.json");
    write_json(
        Path::new(&dict_path),
        &DictionaryFile {
            kind: "dictionary",
            provenance: &prov,
            dictionary: &dict,
        },
    )?;
    println!("{} rows x {} columns -> {}", table.len(), table.dims(), out.display());
    Ok(())
}

pub fn synth(args: &ConfigArgs, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = load_config(args)?;
    let seed = pick_seed(&cfg, seed);
    let scn = Scenario::build(&cfg.scenario_config(seed))?;
    write_table(&scn.table, out)?;
    let sidecar = schema_sidecar(out);
    let mut text = fs::read_to_string(&sidecar).map_err(CliError::output(&sidecar))?;
    text.push_str(&provenance(&cfg, "synth", &[seed]).comment_lines());
    write_text(&sidecar, &text)?;
    println!("{} rows x {} columns -> {}", scn.table.len(), scn.table.dims(), out.display());
    Ok(())
}

fn write_workload(path: &Path, w: &TimedWorkload, prov: &Provenance) -> CliResult<()> {
    write_text(path, &(prov.comment_lines() + &w.to_text()))
}

pub fn workload(args: &ConfigArgs, table: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = load_config(args)?;
    let seed = pick_seed(&cfg, seed);
    let scn_cfg = cfg.scenario_config(seed);
    let scn = match table {
        Some(p) => {
            let t = load_table(p)?;
            check_width(&cfg, t.dims(), p)?;
            Scenario::with_table(t, &scn_cfg)?
        }
        None => Scenario::build(&scn_cfg)?,
    };
    ensure_dir(out)?;
    let prov = provenance(&cfg, "workload", &[seed]);
    write_workload(&out.join("reps.txt"), &TimedWorkload::single_interval(&scn.reps), &prov)?;
    write_workload(&out.join("train.txt"), &scn.train, &prov)?;
    write_workload(&out.join("test.txt"), &scn.test, &prov)?;
    println!(
        "{} representatives, {} train and {} test queries over {} intervals -> {}",
        scn.reps.len(),
        scn.train.len(),
        scn.test.len(),
        scn.train.intervals.len(),
        out.display()
    );
    Ok(())
}

/// Queries may only name columns of the table.
fn check_width(cfg: &ExperimentConfig, dims: usize, path: &Path) -> CliResult<()> {
    if cfg.max_preds > dims {
        return Err(CliError::Usage(format!(
            "max_preds = {} but {} has only {dims} columns",
            cfg.max_preds,
            path.display()
        )));
    }
    Ok(())
}

fn check_queries(queries: &[Query], dims: usize, path: &Path) -> CliResult<()> {
    match queries.iter().find(|q| q.max_col() >= dims) {
        Some(q) => Err(CliError::Data {
            path: path.into(),
            msg: format!("query {} names column {} of a {dims}-column table", q.id, q.max_col()),
        }),
        None => Ok(()),
    }
}

fn single_method(cfg: &ExperimentConfig, flag: Option<&str>) -> CliResult<Method> {
    match flag {
        Some(m) => m.parse().map_err(|e| CliError::Usage(format!("--method: {e}"))),
        None => match cfg.methods[..] {
            [m] => Ok(m),
            _ => Err(CliError::Usage(format!(
                "config lists {} methods; pick one with --method",
                cfg.methods.len()
            ))),
        },
    }
}

pub fn blocks(
    args: &ConfigArgs,
    table: &Path,
    workload: Option<&Path>,
    method: Option<&str>,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<()> {
    let cfg = load_config(args)?;
    let method = single_method(&cfg, method)?;
    let seed = pick_seed(&cfg, seed);
    let t = load_table(table)?;
    let queries: Vec<Query> = match workload {
        Some(p) => {
            let q: Vec<Query> = load_workload(p)?.queries().cloned().collect();
            check_queries(&q, t.dims(), p)?;
            q
        }
        None if method.is_workload_aware() => {
            return Err(CliError::Usage(format!("method {method} needs --workload")));
        }
        None => Vec::new(),
    };
    let lcfg = cfg.layout_config(method);
    let layout = build_layout(&t, method, &queries, &lcfg, layout_seed(seed))?;
    let prov = provenance(&cfg, "blocks", &[seed]);

    ensure_dir(out)?;
    let mut manifest = Manifest::from_forest(&layout.forest, Some(method), cfg.block_size, t.dims())?;
    manifest.provenance = Some(prov.clone());
    let mpath = out.join("manifest.json");
    let file = fs::File::create(&mpath).map_err(CliError::output(&mpath))?;
    manifest.write(std::io::BufWriter::new(file))?;

    let sizes: Vec<usize> = layout.forest.blocks().iter().map(|b| b.size()).collect();
    let report = PartitionFile {
        kind: "partition".into(),
        provenance: prov,
        method,
        block_size: cfg.block_size,
        rows: layout.forest.total_rows(),
        blocks: BlockStats {
            count: sizes.len(),
            min_rows: sizes.iter().copied().min().unwrap_or(0),
            max_rows: sizes.iter().copied().max().unwrap_or(0),
            mean_rows: if sizes.is_empty() {
                0.0
            } else {
                sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
            },
        },
        partition: layout.partition.clone(),
    };
    write_json(&out.join("partition.json"), &report)?;
    print!("{}", format_partition(&report));
    Ok(())
}

fn parse_settings(s: &str) -> CliResult<Vec<Setting>> {
    match s {
        "cloud-edge" => Ok(vec![Setting::CloudEdge]),
        "three-tier" => Ok(vec![Setting::ThreeTier]),
        "both" => Ok(vec![Setting::CloudEdge, Setting::ThreeTier]),
        other => Err(CliError::Usage(format!(
            "--setting must be cloud-edge, three-tier or both, got `{other}`"
        ))),
    }
}

/// The external scenario with `seed` applied, or the synthetic one.
fn scenario(cfg: &ExperimentConfig, inputs: &Inputs, seed: u64, loaded: &Option<Scenario>) -> CliResult<Scenario> {
    match (loaded, &inputs.table) {
        (Some(s), _) => {
            let mut s = s.clone();
            s.config.seed = seed;
            Ok(s)
        }
        (None, None) => Ok(Scenario::build(&cfg.scenario_config(seed))?),
        (None, Some(_)) => Err(CliError::Internal("inputs were not loaded".into())),
    }
}

fn load_inputs(inputs: &Inputs) -> CliResult<Option<Scenario>> {
    let (Some(t), Some(r), Some(a), Some(b)) = (&inputs.table, &inputs.reps, &inputs.train, &inputs.test) else {
        return Ok(None);
    };
    let table = load_table(t)?;
    let reps: Vec<Query> = load_workload(r)?.queries().cloned().collect();
    let train = load_workload(a)?;
    let test = load_workload(b)?;
    for (p, w) in [(r, reps.clone()), (a, train.queries().cloned().collect()), (b, test.queries().cloned().collect())] {
        check_queries(&w, table.dims(), p)?;
    }
    Ok(Some(Scenario::from_parts(table, reps, train, test, 0)))
}

pub fn simulate(args: &ConfigArgs, setting: &str, inputs: &Inputs, out: &Path) -> CliResult<()> {
    let cfg = load_config(args)?;
    let settings = parse_settings(setting)?;
    let loaded = load_inputs(inputs)?;
    let sim = cfg.sim_config();
    let prov = provenance(&cfg, "simulate", &cfg.seeds);
    ensure_dir(out)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let scn = scenario(&cfg, inputs, seed, &loaded)?;
        let mut series = Vec::new();
        for &m in &cfg.methods {
            let (_, runs) = scn.evaluate(m, &cfg.layout_config(m), &sim, &settings)?;
            series.extend(runs);
        }
        let mut csv = Vec::new();
        csv.extend_from_slice(provenance(&cfg, "simulate", &[seed]).comment_lines().as_bytes());
        write_metrics_csv(&mut csv, &series)?;
        let path = out.join(format!("metrics-seed{seed}.csv"));
        fs::write(&path, csv).map_err(CliError::output(&path))?;
        rows.extend(summarize(&series).into_iter().map(|row| SeedRow { seed, row }));
    }
    let summary = SummaryFile::new(prov, rows);
    write_json(&out.join("summary.json"), &summary)?;
    print!("{}", format_summary(&summary));
    Ok(())
}

pub fn bench(args: &ConfigArgs, inputs: &Inputs, repetitions: usize, out: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(args)?;
    if repetitions == 0 {
        return Err(CliError::Usage("--repetitions must be at least 1".into()));
    }
    let seed = cfg.seeds[0];
    let scn = scenario(&cfg, inputs, seed, &load_inputs(inputs)?)?;
    // build_layout picks the filter mode from the method for the Brame variants
    let lcfg = cfg.layout_config(Method::BrameS);
    let rows = bench_build(&scn.table, &cfg.methods, &scn.reps, &lcfg, repetitions, layout_seed(seed))?;
    let file = BenchFile {
        kind: "bench".into(),
        provenance: provenance(&cfg, "bench", &[seed]),
        rows: scn.table.len(),
        entries: rows
            .iter()
            .map(|r| BenchEntry {
                method: r.method,
                total_ms: r.total.as_secs_f64() * 1e3,
                blocks: r.blocks,
                repetitions: r.repetitions,
                phases_ms: r.phases.iter().map(|(n, d)| (n.clone(), d.as_secs_f64() * 1e3)).collect(),
            })
            .collect(),
    };
    if let Some(p) = out {
        write_json(p, &file)?;
    }
    print!("{}", format_bench(&file));
    Ok(())
}
