mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use acw_core::synth::report;
use common::*;

const NOW: &str = "1700000000";

#[test]
fn exit_codes() {
    assert_eq!(acw(&["--help"]).status.code(), Some(0));
    assert_eq!(acw(&["--version"]).status.code(), Some(0));
    assert_eq!(acw(&[]).status.code(), Some(1));
    assert_eq!(acw(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(acw(&["train", "--labeled", "x.jsonl"]).status.code(), Some(1));
    assert_eq!(
        acw(&["train", "--labeled", "x", "--out", "y", "--epochs", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        acw(&["mine", "--source", "/nonexistent/history", "--mode", "fixture", "--out", "/tmp/never"]).status.code(),
        Some(2)
    );
    let missing = acw(&["rank", "--model", "/nonexistent/m.json", "--report", "r", "--out", "o"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).starts_with("error:"));
}

#[test]
fn bad_config_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("acw.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = acw_with_env(&["eval", "--model", "m", "--labeled", "l"], &[("ACW_CONFIG", s(&cfg))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mine_then_label_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = lifecycle_fixture();
    let mined = dir.path().join("mined.jsonl");
    let o = ok(acw(&["mine", "--source", s(&fixture), "--out", s(&mined), "--now", NOW]));
    let out = stdout(&o);
    assert!(out.contains("revisions    6"), "{out}");
    assert!(out.contains("actionable   2"), "{out}");
    assert!(out.contains("false_alarm  2"), "{out}");
    assert!(out.contains("undecided    2"), "{out}");
    assert_eq!(std::fs::read_to_string(&mined).unwrap().lines().count(), 6);
    let prov: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mined.jsonl.provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["revisions"], 6);
    assert_eq!(prov["mode"], "fixture");

    let labeled = dir.path().join("labeled.jsonl");
    let o = ok(acw(&["label", "--corpus", s(&mined), "--source", s(&fixture), "--out", s(&labeled)]));
    let out = stdout(&o);
    assert!(out.contains("VTB           1"), "{out}");
    assert!(out.contains("LTB           1"), "{out}");
    assert!(out.contains("FalseWarning  2"), "{out}");
    assert_eq!(std::fs::read_to_string(&labeled).unwrap().lines().count(), 4);
}

#[test]
fn far_future_now_ages_out_open_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let mined = dir.path().join("mined.jsonl");
    let o = ok(acw(&[
        "mine",
        "--source",
        s(&lifecycle_fixture()),
        "--out",
        s(&mined),
        "--now",
        "9999999999",
    ]));
    assert!(stdout(&o).contains("undecided    0"));
    assert!(stdout(&o).contains("false_alarm  4"));
}

#[test]
fn label_refuses_a_different_history() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = lifecycle_fixture();
    let mined = dir.path().join("mined.jsonl");
    ok(acw(&["mine", "--source", s(&fixture), "--out", s(&mined), "--now", NOW, "--limit", "4"]));
    let labeled = dir.path().join("labeled.jsonl");
    // Same window as mined: fine.
    ok(acw(&["label", "--corpus", s(&mined), "--source", s(&fixture), "--out", s(&labeled)]));

    let prov = dir.path().join("mined.jsonl.provenance.json");
    let text = std::fs::read_to_string(&prov).unwrap().replace(&"2".repeat(40), &"f".repeat(40));
    std::fs::write(&prov, text).unwrap();
    let o = acw(&["label", "--corpus", s(&mined), "--source", s(&fixture), "--out", s(&labeled)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mined from"), "{}", stderr(&o));
}

fn train_args<'a>(corpus: &'a str, out: &'a str, seed: &'a str) -> Vec<&'a str> {
    let mut args = vec!["train", "--labeled", corpus, "--out", out, "--seed", seed];
    args.extend_from_slice(FAST);
    args
}

#[test]
fn training_and_eval_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("labeled.jsonl");
    write_corpus(&corpus, &acw_core::synth::labeled_corpus(&small_synth(3)));
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    let o = ok(acw(&train_args(s(&corpus), s(&a), "7")));
    assert!(stdout(&o).contains("two-stage"), "{}", stdout(&o));
    ok(acw(&train_args(s(&corpus), s(&b), "7")));
    ok(acw(&train_args(s(&corpus), s(&c), "8")));
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(read(&dir.path().join("a.report.json")), read(&dir.path().join("b.report.json")));

    let (e1, e2) = (dir.path().join("e1.json"), dir.path().join("e2.json"));
    let eval = |out: &Path| ok(acw(&["eval", "--model", s(&a), "--labeled", s(&corpus), "--out", s(out)]));
    let o1 = eval(&e1);
    let o2 = eval(&e2);
    assert_eq!(read(&e1), read(&e2));
    assert_eq!(o1.stdout, o2.stdout);
    let report: serde_json::Value = serde_json::from_slice(&read(&e1)).unwrap();
    assert_eq!(report["model"]["ranker"], "two-stage");
    assert_eq!(report["random"]["ranker"], "random");
    assert_eq!(report["model"]["protocol"]["n_queries"], 100);

    // The corpus must match the one recorded in the model.
    let other = dir.path().join("other.jsonl");
    write_corpus(&other, &acw_core::synth::labeled_corpus(&small_synth(4)));
    assert_eq!(
        acw(&["eval", "--model", s(&a), "--labeled", s(&other)]).status.code(),
        Some(2)
    );
}

#[test]
fn train_rejects_inconsistent_labels() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = acw_core::synth::labeled_corpus(&small_synth(0));
    let r = records.iter_mut().find(|r| r.cm.is_some()).unwrap();
    r.cm = Some(0);
    r.cc = Some(0);
    r.aggregated = acw_core::WeakLabelClass::Vtb;
    let corpus = dir.path().join("bad.jsonl");
    write_corpus(&corpus, &records);
    let out = dir.path().join("m.json");
    let o = acw(&train_args(s(&corpus), s(&out), "0"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn rank_orders_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path(), "both");
    let rep = report(&small_synth(11), 60);
    let report_path = dir.path().join("report.json");
    std::fs::write(&report_path, &rep.report_json).unwrap();
    let src = dir.path().join("src-tree");
    write_sources(&src, &rep.sources);
    let out = dir.path().join("ranked.json");
    let o = ok(acw(&[
        "rank",
        "--model",
        s(&model),
        "--report",
        s(&report_path),
        "--sources",
        s(&src),
        "--out",
        s(&out),
    ]));
    assert!(stdout(&o).starts_with("ranked 60 warnings"));
    let ranked: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(ranked.len(), 60);
    for (i, w) in ranked.iter().enumerate() {
        assert_eq!(w["rank"], i + 1);
        let band = match w["predicted_class"].as_str().unwrap() {
            "VTB" => "red",
            "LTB" => "orange",
            _ => "none",
        };
        assert_eq!(w["band"], band);
    }
    for pair in ranked.windows(2) {
        assert!(pair[0]["score"].as_f64().unwrap() >= pair[1]["score"].as_f64().unwrap());
    }

    let detector = trained_model(dir.path(), "detector");
    let o = acw(&["rank", "--model", s(&detector), "--report", s(&report_path), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--stage both"));
}

fn git(repo: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "user.name=t", "-c", "user.email=t@example.com", "-c", "commit.gpgsign=false"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

#[test]
fn live_git_mode_with_pregenerated_reports() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    std::fs::create_dir(&repo).unwrap();
    git(&repo, &["init", "-q"]);
    let reports = dir.path().join("reports");
    std::fs::create_dir(&reports).unwrap();

    let null_warning = r#"{"bug_type":"NULL_DEREFERENCE","file":"a.c","procedure":"f","line":3,
        "qualifier":"pointer `p` last assigned on line 2 could be null and is dereferenced at line 3."}"#;
    let revisions = [
        ("int f(void) {\n  int *p = get();\n  return *p;\n}\n", "add f", format!("[{null_warning}]")),
        ("int f(void) {\n  int *p = get();\n  return *p + 0;\n}\n", "tweak f", format!("[{null_warning}]")),
        (
            "int f(void) {\n  int *p = get();\n  if (p == NULL) return 0;\n  return *p;\n}\n",
            "Fix null pointer dereference in f",
            "[]".to_string(),
        ),
    ];
    for (i, (text, msg, rep)) in revisions.iter().enumerate() {
        std::fs::write(repo.join("a.c"), text).unwrap();
        git(&repo, &["add", "a.c"]);
        git(&repo, &["commit", "-q", "-m", msg, "--date", &format!("{} +0000", 1_690_000_000 + i * 1000)]);
        let sha = git(&repo, &["rev-parse", "HEAD"]);
        std::fs::write(reports.join(format!("{sha}.json")), rep).unwrap();
    }

    let mined = dir.path().join("mined.jsonl");
    let args = ["mine", "--source", s(&repo), "--mode", "git", "--out", s(&mined), "--now", NOW];
    // Without a configured analyzer or report directory, live mode refuses.
    assert_eq!(acw(&args).status.code(), Some(2));

    let cfg = dir.path().join("acw.toml");
    std::fs::write(&cfg, format!("reports_dir = {:?}\n", s(&reports))).unwrap();
    let env = [("ACW_CONFIG", s(&cfg))];
    let o = acw_with_env(&args, &env);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("revisions    3"));
    assert!(stdout(&o).contains("actionable   1"));

    let labeled = dir.path().join("labeled.jsonl");
    let o = acw_with_env(&["label", "--corpus", s(&mined), "--source", s(&repo), "--mode", "git", "--out", s(&labeled)], &env);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("VTB           1"), "{}", stdout(&o));

    let mut limited = args.to_vec();
    limited.extend(["--limit", "2"]);
    let o = acw_with_env(&limited, &env);
    assert!(stdout(&o).contains("revisions    2"));
}

fn serve_args<'a>(model: &'a str, report: &'a str, state: &'a str, port: &'a str) -> Vec<&'a str> {
    vec!["serve", "--model", model, "--report", report, "--state", state, "--port", port]
}

#[test]
fn serve_reports_a_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path(), "both");
    let report_path = dir.path().join("report.json");
    std::fs::write(&report_path, report(&small_synth(1), 5).report_json).unwrap();
    let state = dir.path().join("state.json");
    let busy = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();

    let mut child = Command::new(env!("CARGO_BIN_EXE_acw"))
        .args(serve_args(s(&model), s(&report_path), s(&state), &port))
        .env_remove("ACW_CONFIG")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(30);
    let status = loop {
        if let Some(st) = child.try_wait().unwrap() {
            break st;
        }
        if Instant::now() > deadline {
            child.kill().unwrap();
            panic!("serve kept running on a busy port");
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    assert_eq!(status.code(), Some(2));
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert!(err.contains("cannot listen"), "{err}");
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path(), "both");
    let report_path = dir.path().join("report.json");
    std::fs::write(&report_path, report(&small_synth(1), 25).report_json).unwrap();
    let state = dir.path().join("state.json");

    let mut child = Command::new(env!("CARGO_BIN_EXE_acw"))
        .args(serve_args(s(&model), s(&report_path), s(&state), "0"))
        .env_remove("ACW_CONFIG")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();

    let mut stream = TcpStream::connect(&addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    write!(stream, "GET /api/meta HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"warnings\":25"), "{resp}");
}
