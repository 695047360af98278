//! End-to-end runs of the `streampredict` binary on the checked-in fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().to_path_buf()
}

fn fixture(name: &str) -> PathBuf {
    workspace().join("fixtures").join(name)
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streampredict"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    let text = format!(
        "{body}\n[dataset]\npath = {:?}\n\n[outputs]\ndir = {:?}\n",
        fixture("example.csv"),
        dir.join("out")
    );
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Drops the trailing latency column, which is wall-clock dependent.
fn without_latency(table: &str) -> String {
    table
        .lines()
        .map(|l| l.rsplit_once('\t').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn streaming_run_writes_table_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"models = ["fpt", "bag", "ngram2", "soft"]"#);
    let o = bin(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("out/table.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "model\taccuracy_pct\tstates\tmean_latency_ms");
    assert_eq!(rows.len(), 5);
    assert!(rows[4].starts_with("soft voting\t"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);
    let curve = fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("event_index,model,rolling_accuracy"));
    // one curve point per scored event and model: 54 events, 4 models
    assert_eq!(curve.lines().count(), 1 + 54 * 4);
}

#[test]
fn batch_run_with_model_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mode = \"batch\"\nmodels = [\"fpt\", \"bag\"]\nruns = 2");
    let o = bin(&["run", "--config", cfg.to_str().unwrap(), "--override", "models=ngram5", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("out/table.tsv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("5-gram\t"));
    assert!(dir.path().join("out/summary.tsv").exists());
}

#[test]
fn repeated_runs_agree_apart_from_latency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"models = ["fpt", "ngram3", "hard", "adaptive", "fallback"]"#);
    let first = bin(&["run", "--config", cfg.to_str().unwrap()]);
    let second = bin(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&first), 0);
    assert_eq!(code(&second), 0);
    assert_eq!(
        without_latency(&String::from_utf8_lossy(&first.stdout)),
        without_latency(&String::from_utf8_lossy(&second.stdout))
    );
}

#[test]
fn missing_dataset_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "models = [\"fpt\"]\n[dataset]\npath = \"nowhere.csv\"\n").unwrap();
    assert_eq!(code(&bin(&["run", "--config", cfg.to_str().unwrap()])), 3);
}

#[test]
fn bad_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"models = ["fpt"]"#);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&bin(&["run", "--config", cfg, "--override", "models=lstm"])), 2);
    assert_eq!(code(&bin(&["run", "--config", cfg, "--override", "nokey"])), 2);
    assert_eq!(code(&bin(&["run", "--config", cfg, "--override", "models=alergia"])), 2);
    assert_eq!(code(&bin(&["run", "--config", cfg, "--mode", "batch", "--override", "models=adaptive"])), 2);
    assert_eq!(code(&bin(&["run", "--config", "/nonexistent/run.toml"])), 2);
}

#[test]
fn inspect_golden_dump() {
    let o = bin(&["inspect", fixture("example-3gram.fdfa").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    for line in ["states\t7", "transitions\t10", "zero_count_transitions\t1", "stop_mass\t30", "unreachable_states\t0"] {
        assert!(out.lines().any(|l| l == line), "missing {line:?} in\n{out}");
    }
}

#[test]
fn corrupt_dump_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let golden = fs::read_to_string(fixture("example-3gram.fdfa")).unwrap();
    let p = dir.path().join("bad.fdfa");
    fs::write(&p, &golden[..golden.len() / 2]).unwrap();
    let truncated = code(&bin(&["inspect", p.to_str().unwrap()]));
    fs::write(&p, "not a dump\n").unwrap();
    let garbage = code(&bin(&["inspect", p.to_str().unwrap()]));
    assert_eq!((truncated, garbage), (2, 2));
}

#[test]
fn dump_reproduces_the_golden_file() {
    let o = bin(&["dump", "--dataset", fixture("example.csv").to_str().unwrap(), "--model", "ngram3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        fs::read_to_string(fixture("example-3gram.fdfa")).unwrap()
    );
    let ens = bin(&["dump", "--dataset", fixture("example.csv").to_str().unwrap(), "--model", "soft"]);
    assert_eq!(code(&ens), 2);
}

#[test]
fn checked_in_configs_parse() {
    let dir = workspace().join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&p).unwrap();
            let v: toml::Table = toml::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert!(v.contains_key("models"), "{}", p.display());
            seen += 1;
        }
    }
    assert_eq!(seen, 15);
}
