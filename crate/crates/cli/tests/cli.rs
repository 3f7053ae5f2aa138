use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tierblock::ingest::read_table;
use tierblock::manifest::Manifest;

const SMALL: &str = "\
# small desk run
[data]
rows = 12000
representatives = 12
intervals = 4
[layout]
block_size = 256
[sim]
budgets = 0.04, 0.08, 0.16, 0.32
capacities = 0.02
seeds = 5
";

fn tierblock(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tierblock"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    dir
}

#[test]
fn simulate_is_reproducible_and_reports_every_budget() {
    let dir = setup();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(&tierblock(&["simulate", "-c", "small.cfg", "--setting", "cloud-edge", "--out", out], d));
    }
    let a = fs::read(d.join("a/metrics-seed5.csv")).unwrap();
    let b = fs::read(d.join("b/metrics-seed5.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# tierblock "));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("\nmethod,setting,budget_or_capacity,interval,thr,bhr,moved_blocks,moved_tuples\n"));

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(d.join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "summary");
    assert_eq!(summary["provenance"]["seeds"], serde_json::json!([5]));
    let means = summary["means"].as_array().unwrap();
    for m in ["key-order", "kdtree", "curve", "brame-h", "brame-s"] {
        let rows = means.iter().filter(|r| r["method"] == m).count();
        assert_eq!(rows, 4, "{m}");
    }
}

#[test]
fn provenance_hash_follows_the_config() {
    let dir = setup();
    let d = dir.path();
    ok(&tierblock(&["simulate", "-c", "small.cfg", "--setting", "cloud-edge", "--set", "method=kdtree", "--out", "a"], d));
    ok(&tierblock(
        &["simulate", "-c", "small.cfg", "--setting", "cloud-edge", "--set", "method=kdtree", "--set", "gamma=0.5", "--out", "b"],
        d,
    ));
    let hash = |p: &str| {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(d.join(p)).unwrap()).unwrap();
        v["provenance"]["config_sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("a/summary.json").len(), 64);
    assert_ne!(hash("a/summary.json"), hash("b/summary.json"));
}

#[test]
fn blocks_manifest_covers_every_row_once() {
    let dir = setup();
    let d = dir.path();
    ok(&tierblock(&["synth", "-c", "small.cfg", "--out", "t.bin"], d));
    ok(&tierblock(&["workload", "-c", "small.cfg", "--table", "t.bin", "--out", "w"], d));
    ok(&tierblock(
        &[
            "blocks", "-c", "small.cfg", "--set", "block_size=2048", "--table", "t.bin", "--workload", "w/reps.txt",
            "--method", "brame-s", "--out", "b",
        ],
        d,
    ));
    let table = read_table(&d.join("t.bin")).unwrap();
    let m = Manifest::read(fs::File::open(d.join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.block_size, 2048);
    assert!(m.provenance.is_some());
    // loading validates coverage, MBRs and block ids
    let forest = m.into_forest(&table).unwrap();
    let mut seen = vec![0u8; table.len()];
    for b in forest.blocks() {
        assert!(b.size() <= 2048);
        for &r in &b.rows {
            seen[r as usize] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));

    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("b/partition.json")).unwrap()).unwrap();
    assert_eq!(report["kind"], "partition");
    assert_eq!(report["partition"]["filter"], "soft");
    let out = tierblock(&["report", "b/partition.json"], d);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("soft filter"));
}

#[test]
fn external_inputs_drive_simulate_and_bench() {
    let dir = setup();
    let d = dir.path();
    ok(&tierblock(&["synth", "-c", "small.cfg", "--out", "t.bin"], d));
    ok(&tierblock(&["workload", "-c", "small.cfg", "--table", "t.bin", "--out", "w"], d));
    let inputs = ["--table", "t.bin", "--reps", "w/reps.txt", "--train", "w/train.txt", "--test", "w/test.txt"];
    let mut args = vec!["simulate", "-c", "small.cfg", "--set", "method=brame-h", "--out", "ext"];
    args.extend(inputs);
    ok(&tierblock(&args, d));
    // the same table and workloads as the synthetic run, so the metrics agree
    ok(&tierblock(&["simulate", "-c", "small.cfg", "--set", "method=brame-h", "--out", "syn"], d));
    let body = |p: &str| {
        let t = fs::read_to_string(d.join(p)).unwrap();
        t.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body("ext/metrics-seed5.csv"), body("syn/metrics-seed5.csv"));

    let mut args = vec!["bench", "-c", "small.cfg", "--repetitions", "1", "--out", "bench.json"];
    args.extend(inputs);
    ok(&tierblock(&args, d));
    let out = tierblock(&["report", "bench.json", "ext/summary.json", "ext/metrics-seed5.csv"], d);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("key-order"));
    assert!(text.contains("brame-h"));
    assert!(text.contains("interval means"));
}

#[test]
fn ingest_normalizes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("data.csv"), "x,color\n1,red\n3,blue\n2,red\n").unwrap();
    fs::write(d.join("data.schema"), "x,numeric\ncolor,categorical\n").unwrap();
    ok(&tierblock(&["ingest", "--input", "data.csv", "--schema", "data.schema", "--out", "t.bin"], d));
    let t = read_table(&d.join("t.bin")).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.row(0), &[0.0, 1.0]);
    assert_eq!(t.row(1), &[1.0, 0.0]);
    assert_eq!(t.row(2), &[0.5, 1.0]);
    let dict: serde_json::Value = serde_json::from_slice(&fs::read(d.join("t.bin.dict.json")).unwrap()).unwrap();
    assert_eq!(dict["dictionary"]["columns"]["1"], serde_json::json!(["blue", "red"]));
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    let code = |args: &[&str]| tierblock(args, d).status.code();

    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["simulate"]), Some(1), "missing --out");
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["simulate", "--set", "nope=1", "--out", "x"]), Some(1));
    assert_eq!(code(&["simulate", "--set", "gamma=0.1", "--set", "gamma=0.2", "--out", "x"]), Some(1));
    assert_eq!(code(&["simulate", "--table", "t.bin", "--out", "x"]), Some(1), "table without workloads");
    assert_eq!(code(&["simulate", "-c", "missing.cfg", "--out", "x"]), Some(1));
    assert_eq!(code(&["blocks", "--table", "missing.bin", "--method", "kdtree", "--out", "x"]), Some(1));

    ok(&tierblock(&["synth", "-c", "small.cfg", "--out", "t.bin"], d));
    assert_eq!(code(&["blocks", "-c", "small.cfg", "--table", "t.bin", "--out", "x"]), Some(1), "several methods");
    assert_eq!(
        code(&["blocks", "-c", "small.cfg", "--table", "t.bin", "--method", "brame-s", "--out", "x"]),
        Some(1),
        "brame-s without a workload"
    );

    fs::write(d.join("bad.txt"), "0 1 2 0,0.5\n").unwrap();
    assert_eq!(
        code(&["blocks", "-c", "small.cfg", "--table", "t.bin", "--workload", "bad.txt", "--method", "brame-s", "--out", "x"]),
        Some(2)
    );
    fs::write(d.join("t.bin"), [0u8; 12]).unwrap();
    assert_eq!(code(&["blocks", "--table", "t.bin", "--method", "kdtree", "--out", "x"]), Some(2));
    fs::write(d.join("junk.json"), "{\"kind\": \"other\"}").unwrap();
    assert_eq!(code(&["report", "junk.json"]), Some(2));
}
