use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use acw_core::corpus::LabelTally;
use acw_core::eval::{metric_table, GainMap, Protocol};
use acw_core::ingest::{load_history, parse_report, HistorySource, SourceSnapshot};
use acw_core::labeler::{label_corpus, KeywordConfig};
use acw_core::miner::{mine as mine_history, read_jsonl, write_jsonl, MinedCorpus, Provenance, StatusCounts, TrackedWarning};
use acw_core::nn::{rank as rank_warnings, ClassWeighting};
use acw_core::pipeline::{evaluate_model, train_model, SplitMode, TrainOptions};
use acw_core::{aggregate_label, AcwConfig, HashingEncoder, LabeledRecord, ModelDoc, Stage, TrainingConfig};

use crate::output::{write_atomic, RankedEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Git,
    Fixture,
}

fn history_source(path: &Path, mode: Option<ModeArg>) -> HistorySource {
    match mode {
        Some(ModeArg::Git) => HistorySource::git(path),
        Some(ModeArg::Fixture) => HistorySource::fixture(path),
        None => HistorySource::detect(path),
    }
}

/// `<out>.provenance.json`
pub fn provenance_path(corpus: &Path) -> PathBuf {
    let mut name = corpus.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Git repository or fixture directory.
    #[arg(long)]
    pub source: PathBuf,
    /// Defaults to `fixture` when the source has a commits.jsonl.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Only the most recent N first-parent revisions.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Unix time used by the two-year aging rule (default: the current time).
    #[arg(long)]
    pub now: Option<i64>,
}

pub fn mine(args: &MineArgs, cfg: &AcwConfig) -> Result<()> {
    let source = history_source(&args.source, args.mode);
    let revisions = load_history(&source, args.limit, cfg)?;
    let now = match args.now {
        Some(t) => t,
        None => SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs() as i64,
    };
    let mode = match source.mode {
        acw_core::ingest::SourceMode::Git => "git",
        acw_core::ingest::SourceMode::Fixture => "fixture",
    };
    let mined = mine_history(&revisions, now, &args.source.display().to_string(), mode, args.limit)?;

    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &mined.warnings)?;
    write_atomic(&args.out, &bytes)?;
    let prov = serde_json::to_string_pretty(&mined.provenance)? + "\n";
    write_atomic(&provenance_path(&args.out), prov.as_bytes())?;

    let c = mined.counts;
    println!("revisions    {}", revisions.len());
    println!("actionable   {}", c.actionable);
    println!("false_alarm  {}", c.false_alarm);
    println!("undecided    {}", c.undecided);
    Ok(())
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Mined corpus (JSONL) written by `acw mine`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// The history the corpus was mined from.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Keyword file (TOML); built-in lists when omitted.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn label(args: &LabelArgs, cfg: &AcwConfig) -> Result<()> {
    let keywords = match &args.keywords {
        Some(p) => KeywordConfig::load(p)?,
        None => KeywordConfig::default(),
    };
    let warnings: Vec<TrackedWarning> = read_jsonl(&args.corpus)?;
    let prov_path = provenance_path(&args.corpus);
    let provenance: Option<Provenance> = if prov_path.is_file() {
        Some(serde_json::from_str(&fs::read_to_string(&prov_path)?).with_context(|| format!("{}", prov_path.display()))?)
    } else {
        None
    };
    let source = history_source(&args.source, args.mode);
    let revisions = load_history(&source, provenance.as_ref().and_then(|p| p.limit), cfg)?;
    let (first, last) = match (revisions.first(), revisions.last()) {
        (Some(f), Some(l)) => (f.commit.sha.clone(), l.commit.sha.clone()),
        _ => bail!("history at {} is empty", args.source.display()),
    };
    let provenance = match provenance {
        Some(p) => {
            if p.first_sha != first || p.last_sha != last || p.revisions != revisions.len() {
                bail!(
                    "corpus was mined from revisions {}..{} ({}), but the source now yields {first}..{last} ({})",
                    p.first_sha,
                    p.last_sha,
                    p.revisions,
                    revisions.len()
                );
            }
            p
        }
        None => Provenance {
            source: args.source.display().to_string(),
            mode: String::new(),
            limit: None,
            first_sha: first,
            last_sha: last,
            revisions: revisions.len(),
            mined_at: 0,
        },
    };
    if let Some(bad) = warnings.iter().find(|w| w.representative.revision_index >= revisions.len()) {
        bail!("warning {} refers to revision {} beyond the history", bad.representative.id, bad.representative.revision_index);
    }
    let mined = MinedCorpus {
        counts: StatusCounts::tally(&warnings),
        warnings,
        provenance,
    };
    let labeled = label_corpus(&mined, &revisions, &keywords)?;
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &labeled.records)?;
    write_atomic(&args.out, &bytes)?;
    print_tally(&labeled.tally);
    Ok(())
}

fn print_tally(t: &LabelTally) {
    println!("VTB           {}", t.vtb);
    println!("LTB           {}", t.ltb);
    println!("UTB           {}", t.utb);
    println!("FalseWarning  {}", t.false_warning);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Both,
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Stratified,
    Project,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled corpus (JSONL).
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the configured value (1024).
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Defaults to the configured value (64).
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, value_enum, default_value_t = StageArg::Both)]
    pub stage: StageArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Stratified)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Plain (unweighted) losses instead of inverse-frequency class weights.
    #[arg(long)]
    pub no_class_weights: bool,
    /// Train the reranker from a fresh initialization.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Held-out metric report (default: the model path with `.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledRecord>> {
    let records: Vec<LabeledRecord> = read_jsonl(path)?;
    for (i, r) in records.iter().enumerate() {
        r.warning
            .validate()
            .with_context(|| format!("{}: record {}", path.display(), i + 1))?;
        if let (Some(cm), Some(cc)) = (r.cm, r.cc) {
            if aggregate_label(cm, cc)? != r.aggregated {
                bail!(
                    "{}: record {} has cm={cm}, cc={cc} but label {}",
                    path.display(),
                    i + 1,
                    r.aggregated
                );
            }
        }
    }
    Ok(records)
}

pub fn train(args: &TrainArgs, cfg: &AcwConfig) -> Result<()> {
    let records = read_labeled(&args.labeled)?;
    let stage_cfg = TrainingConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs as usize,
        batch_size: args.batch_size,
        class_weighting: if args.no_class_weights {
            ClassWeighting::None
        } else {
            ClassWeighting::InverseFrequency
        },
        seed: args.seed,
        ..TrainingConfig::default()
    };
    let opts = TrainOptions {
        embed_dim: args.embed_dim.unwrap_or(cfg.embed_dim),
        hidden_dim: args.hidden.unwrap_or(cfg.hidden_dim),
        stage: match args.stage {
            StageArg::Both => Stage::Full,
            StageArg::Detector => Stage::DetectorOnly,
        },
        warm_start: !args.no_warm_start,
        split_mode: match args.split {
            SplitArg::Stratified => SplitMode::Stratified,
            SplitArg::Project => SplitMode::Project,
        },
        test_fraction: args.test_fraction,
        seed: args.seed,
        detector: stage_cfg.clone(),
        reranker: stage_cfg,
        decision_threshold: cfg.decision_threshold,
    };
    let model: ModelDoc = train_model(&records, &opts)?;
    write_atomic(&args.out, model.to_json().as_bytes())?;
    let tally = LabelTally::of(&records);
    println!(
        "trained {:?} model on {} records ({} actionable) -> {}",
        model.stage,
        records.len(),
        tally.actionable(),
        args.out.display()
    );

    let report_path = args.report.clone().unwrap_or_else(|| args.out.with_extension("report.json"));
    let protocol = Protocol {
        seed: args.seed,
        ..Protocol::default()
    };
    match evaluate_model(&model, &records, &protocol) {
        Ok((m, r)) => {
            write_eval(&report_path, &m, &r)?;
            print!("{}", metric_table(&[m, r]));
        }
        Err(e) => log::warn!("no held-out report: {e}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    model: &'a acw_core::eval::MetricReport,
    random: &'a acw_core::eval::MetricReport,
}

fn write_eval(path: &Path, model: &acw_core::eval::MetricReport, random: &acw_core::eval::MetricReport) -> Result<()> {
    let text = serde_json::to_string_pretty(&EvalOutput { model, random })? + "\n";
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Analyzer report (JSON array).
    #[arg(long)]
    pub report: PathBuf,
    /// Source tree the report refers to; enables the code channel.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Ranked entries of a report, most likely bugs first.
pub fn rank_report(model: &ModelDoc, report: &[u8], snapshot: Option<&SourceSnapshot>, cfg: &AcwConfig) -> Result<Vec<RankedEntry>> {
    if model.stage != Stage::Full {
        bail!("the model was trained with --stage detector and has no reranker; retrain with --stage both");
    }
    let parsed = parse_report(report, &cfg.bug_types, 0)?;
    if !parsed.skipped.is_empty() {
        log::info!("{} report records have unhandled bug types", parsed.skipped.len());
    }
    let encoder = HashingEncoder::new(model.embed_dim)?;
    let ranked = rank_warnings(&model.params(), &encoder, &parsed.warnings, snapshot)?;
    Ok(ranked.iter().map(RankedEntry::from).collect())
}

pub fn rank(args: &RankArgs, cfg: &AcwConfig) -> Result<()> {
    let model = ModelDoc::load(&args.model)?;
    let report = fs::read(&args.report).with_context(|| format!("reading {}", args.report.display()))?;
    let snapshot = args.sources.as_deref().map(SourceSnapshot::from_dir).transpose()?;
    let entries = rank_report(&model, &report, snapshot.as_ref(), cfg)?;
    let text = serde_json::to_string_pretty(&entries)? + "\n";
    write_atomic(&args.out, text.as_bytes())?;
    let count = |b| entries.iter().filter(|e| e.band == b).count();
    println!(
        "ranked {} warnings ({} red, {} orange) -> {}",
        entries.len(),
        count(acw_core::nn::Band::Red),
        count(acw_core::nn::Band::Orange),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The labeled corpus the model was trained on.
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub query_size: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5", value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report destination; only the table is printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let model = ModelDoc::load(&args.model)?;
    let records = read_labeled(&args.labeled)?;
    let protocol = Protocol {
        n_queries: args.queries as usize,
        query_size: args.query_size as usize,
        ks: args.k.iter().map(|&k| k as usize).collect(),
        seed: args.seed,
        gains: GainMap::default(),
    };
    let (m, r) = evaluate_model(&model, &records, &protocol)?;
    if let Some(out) = &args.out {
        write_eval(out, &m, &r)?;
    }
    print!("{}", metric_table(&[m, r]));
    Ok(())
}
