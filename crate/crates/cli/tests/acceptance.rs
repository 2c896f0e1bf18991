// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;
mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use acw_core::eval::{MetricReport, Protocol};
use acw_core::pipeline::{evaluate_model, train_model, TrainOptions};
use acw_core::synth::{labeled_corpus, SynthConfig};
use acw_core::ModelDoc;
use common::*;

type Check = Result<String, String>;
type Criterion<'a> = (&'a str, Duration, Box<dyn FnOnce() -> Check + 'a>);

fn within(limit: Duration, f: impl FnOnce() -> Check) -> (Check, Duration) {
    let start = Instant::now();
    let res = f();
    let took = start.elapsed();
    let res = match res {
        Ok(s) if took > limit => Err(format!("{s}; took {took:.2?}, limit {limit:?}")),
        other => other,
    };
    (res, took)
}

fn core_fixtures() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

struct SeedRun {
    f1: f64,
    model: (f64, f64),
    random: (f64, f64),
    ablation: (f64, f64),
}

fn ndcg5_mrr(r: &MetricReport) -> (f64, f64) {
    (r.ranking.ndcg_at(5).unwrap_or(f64::NAN), r.ranking.mrr)
}

fn run_seed(seed: u64) -> Result<SeedRun, String> {
    let records = labeled_corpus(&SynthConfig {
        seed,
        ..SynthConfig::default()
    });
    let opts = TrainOptions {
        seed,
        ..TrainOptions::default()
    };
    let protocol = Protocol {
        seed,
        ..Protocol::default()
    };
    let model: ModelDoc = train_model(&records, &opts).map_err(|e| e.to_string())?;
    let (m, r) = evaluate_model(&model, &records, &protocol).map_err(|e| e.to_string())?;
    let scratch: ModelDoc = train_model(
        &records,
        &TrainOptions {
            warm_start: false,
            ..opts
        },
    )
    .map_err(|e| e.to_string())?;
    let (a, _) = evaluate_model(&scratch, &records, &protocol).map_err(|e| e.to_string())?;
    Ok(SeedRun {
        f1: m.detection.f1,
        model: ndcg5_mrr(&m),
        random: ndcg5_mrr(&r),
        ablation: ndcg5_mrr(&a),
    })
}

fn end_to_end() -> Check {
    let runs: Vec<Result<SeedRun, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..5u64).map(|seed| s.spawn(move || run_seed(seed))).collect();
        handles.into_iter().map(|h| h.join().expect("seed run panicked")).collect()
    });
    let runs: Vec<SeedRun> = runs.into_iter().collect::<Result<_, _>>()?;
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&SeedRun) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let f1 = mean(&|r| r.f1);
    let (nm, nr, na) = (mean(&|r| r.model.0), mean(&|r| r.random.0), mean(&|r| r.ablation.0));
    let (mm, mr, ma) = (mean(&|r| r.model.1), mean(&|r| r.random.1), mean(&|r| r.ablation.1));
    let summary = format!(
        "mean F1 {f1:.3}; nDCG@5 {nm:.3} vs random {nr:.3}, no-warm-start {na:.3}; MRR {mm:.3} vs random {mr:.3}, no-warm-start {ma:.3}"
    );
    if f1 >= 0.80 && nm > nr && nm > na && mm > mr && mm > ma {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("labeled.jsonl");
    write_corpus(&corpus, &labeled_corpus(&SynthConfig::default()));
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    let mut models = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(format!("{name}.json"));
        let o = acw(&["train", "--labeled", s(&corpus), "--out", s(&out), "--seed", "3"]);
        if o.status.code() != Some(0) {
            return Err(format!("train failed: {}", stderr(&o)));
        }
        models.push((read(&out)?, read(&dir.path().join(format!("{name}.report.json")))?));
    }
    if models[0] != models[1] {
        return Err("train outputs differ".into());
    }
    let mut reports = Vec::new();
    for name in ["e1", "e2"] {
        let out = dir.path().join(format!("{name}.json"));
        let model = dir.path().join("a.json");
        let o = acw(&["eval", "--model", s(&model), "--labeled", s(&corpus), "--out", s(&out)]);
        if o.status.code() != Some(0) {
            return Err(format!("eval failed: {}", stderr(&o)));
        }
        reports.push((read(&out)?, o.stdout));
    }
    if reports[0] != reports[1] {
        return Err("eval reports differ".into());
    }
    Ok(format!("model {} bytes, eval report {} bytes", models[0].0.len(), reports[0].0.len()))
}

fn main() {
    let fixtures = core_fixtures();
    let criteria: Vec<Criterion> = vec![
        ("label aggregation table", Duration::from_secs(1), Box::new(oracles::aggregation_table)),
        (
            "rule fixtures",
            Duration::from_secs(1),
            Box::new(|| oracles::rule_fixtures(&fixtures.join("rules.json"))),
        ),
        (
            "mining oracle",
            Duration::from_secs(5),
            Box::new(|| oracles::mining(&fixtures.join("lifecycle"))),
        ),
        (
            "metric oracles",
            Duration::from_secs(60),
            Box::new(|| {
                let a = oracles::ndcg_exhaustive()?;
                let b = oracles::mrr_fixtures()?;
                Ok(format!("nDCG {a}; MRR {b}"))
            }),
        ),
        ("gradient checks", Duration::from_secs(60), Box::new(oracles::gradient_checks)),
        (
            "ranking score ordering",
            Duration::from_secs(60),
            Box::new(|| {
                let a = oracles::score_ordering(10_000, 2024)?;
                let b = oracles::rank_vs_brute_force(1_000, 2025)?;
                Ok(format!("{a}; brute-force sort agrees on {b}"))
            }),
        ),
        ("end-to-end synthetic", Duration::from_secs(300), Box::new(end_to_end)),
        ("determinism", Duration::from_secs(300), Box::new(determinism)),
    ];

    let mut failed = 0;
    for (name, limit, check) in criteria {
        let (res, took) = within(limit, check);
        match res {
            Ok(detail) => println!("PASS  {name}: {detail} [{took:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
