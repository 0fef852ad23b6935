use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isingnn_core::mrf::{sample_model, ModelFile};
use isingnn_core::Graph;
use serde_json::Value;

fn isingnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isingnn"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = isingnn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    isingnn(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_model(dir: &Path, name: &str, g: &Graph, seed: u64) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, ModelFile::from_model(&sample_model(g, seed)).to_json()).unwrap();
    path
}

fn p_plus(stdout: &str) -> Vec<f64> {
    let v: Value = serde_json::from_str(stdout).unwrap();
    v["marginals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m[1].as_f64().unwrap())
        .collect()
}

#[test]
fn generated_datasets_replay_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    ok(&["gen-dataset", "--order", "6", "--count", "5", "--seed", "3", "--out", s(&data)]);
    let first = std::fs::read(&data).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 6);
    let manifest = dir.path().join("data.jsonl.manifest.json");
    std::fs::remove_file(&data).unwrap();
    ok(&["replay", s(&manifest)]);
    assert_eq!(std::fs::read(&data).unwrap(), first);
}

#[test]
fn exact_algorithms_agree_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", &Graph::cycle(7).unwrap(), 11);
    let brute = p_plus(&ok(&["infer", "--model", s(&model), "--algorithm", "brute"]));
    let ve = p_plus(&ok(&["infer", "--model", s(&model), "--algorithm", "ve"]));
    assert_eq!(brute.len(), 7);
    for (a, b) in brute.iter().zip(&ve) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_edges_gives_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let g = Graph::complete(5).unwrap();
    let model = write_model(dir.path(), "m.json", &g, 2);
    let m = sample_model(&g, 2);
    let got = p_plus(&ok(&["infer", "--model", s(&model), "--algorithm", "ve", "--zero-edges"]));
    for (p, b) in got.iter().zip(m.b()) {
        assert!((p - 1.0 / (1.0 + (2.0 * b).exp())).abs() < 1e-12);
    }
}

#[test]
fn gibbs_output_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", &Graph::path(6).unwrap(), 4);
    let run = |seed: &str| {
        let out = dir.path().join(format!("g{seed}.json"));
        ok(&["infer", "--model", s(&model), "--algorithm", "gibbs", "--seed", seed, "--out", s(&out)]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("8"), run("8"));
    assert_ne!(run("8"), run("9"));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["gen-dataset", "--count", "3"]), 1);
    assert_eq!(code(&["infer", "--model", "m.json", "--algorithm", "teleport"]), 1);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&["infer", "--model", s(&missing), "--algorithm", "ve"]), 2);
    let dense = write_model(dir.path(), "dense.json", &Graph::complete(30).unwrap(), 1);
    assert_eq!(code(&["infer", "--model", s(&dense), "--algorithm", "ve"]), 3);
    let small = write_model(dir.path(), "small.json", &Graph::path(3).unwrap(), 1);
    assert_eq!(code(&["infer", "--model", s(&small), "--algorithm", "gnn"]), 1);
    assert_eq!(code(&["infer", "--model", s(&small), "--algorithm", "ve"]), 0);
}

#[test]
fn config_files_supply_defaults_that_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\norder = 5\ncount = 2\nseed = 1\n").unwrap();
    ok(&["gen-dataset", "--config", s(&cfg), "--count", "4", "--out", s(&data)]);
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 5);
    let header: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["order"], 5);
}

#[test]
fn train_then_compare_on_a_small_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let weights = dir.path().join("w.json");
    let table = dir.path().join("cmp.csv");
    ok(&["gen-dataset", "--order", "5", "--count", "6", "--out", s(&data)]);
    ok(&[
        "train", "--dataset", s(&data), "--out", s(&weights), "--epochs", "2", "--message-layers", "8",
        "--readout-layers", "8", "--steps", "3",
    ]);
    assert!(dir.path().join("w.json.history.csv").exists());
    ok(&[
        "compare", "--dataset", s(&data), "--weights", s(&weights), "--algorithms", "gnn,bp", "--repeats", "1",
        "--out", s(&table),
    ]);
    let rows = std::fs::read_to_string(&table).unwrap();
    assert_eq!(rows.lines().count(), 1 + 6 * 2);
    assert!(rows.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert!(dir.path().join("cmp.csv.summary.csv").exists());
}
