#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acw_core::miner::write_jsonl;
use acw_core::synth::{labeled_corpus, SynthConfig};
use acw_core::LabeledRecord;

/// Small enough to train in well under a second.
pub const FAST: &[&str] = &["--embed-dim", "256", "--hidden", "16", "--epochs", "30"];

pub fn acw(args: &[&str]) -> Output {
    acw_with_env(args, &[])
}

pub fn acw_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_acw"));
    cmd.args(args).env_remove("ACW_CONFIG").env("RUST_LOG", "error");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("running acw")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
pub fn ok(o: Output) -> Output {
    assert_eq!(o.status.code(), Some(0), "stdout:\n{}\nstderr:\n{}", stdout(&o), stderr(&o));
    o
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn lifecycle_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/lifecycle")
}

pub fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        vtb: 15,
        ltb: 20,
        utb: 65,
        false_warnings: 500,
        seed,
        ..SynthConfig::default()
    }
}

pub fn write_corpus(path: &Path, records: &[LabeledRecord]) {
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, records).unwrap();
    std::fs::write(path, bytes).unwrap();
}

pub fn write_sources(dir: &Path, sources: &std::collections::BTreeMap<String, String>) {
    for (rel, text) in sources {
        let path = dir.join(rel);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, text).unwrap();
    }
}

/// Writes a small synthetic corpus to `dir/labeled.jsonl` and trains on it.
pub fn trained_model(dir: &Path, stage: &str) -> PathBuf {
    let corpus = dir.join("labeled.jsonl");
    write_corpus(&corpus, &labeled_corpus(&small_synth(0)));
    let model = dir.join(format!("model-{stage}.json"));
    let mut args = vec!["train", "--labeled", s(&corpus), "--out", s(&model), "--stage", stage];
    args.extend_from_slice(FAST);
    ok(acw(&args));
    model
}
