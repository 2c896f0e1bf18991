// Independent oracles shared by the core integration tests and the CLI
// acceptance run. Each check returns Ok with a short summary or Err with the
// first discrepancy.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use acw_core::eval::{mrr, ndcg_at_k};
use acw_core::ingest::{load_history, parse_unified_diff, HistorySource};
use acw_core::labeler::{extract_context_identifiers, semantic_score, structural_score, KeywordConfig};
use acw_core::miner::{mine, FalseAlarmReason, WarningStatus};
use acw_core::nn::{detector_objective, rank_order, rank_score, reranker_objective, ClassWeighting};
use acw_core::{aggregate_label, AcwConfig, EmbeddingVector, ModelParams, Warning, WarningType, WeakLabelClass};

pub type Check = Result<String, String>;

// ---- label aggregation -----------------------------------------------

pub fn aggregation_table() -> Check {
    use WeakLabelClass::*;
    // Written out by hand: cm + cc of 0-1 unlikely, 2-3 likely, 4+ very likely.
    let table = [
        ((0, 0), Utb),
        ((0, 1), Utb),
        ((0, 3), Ltb),
        ((1, 0), Utb),
        ((1, 1), Ltb),
        ((1, 3), Vtb),
        ((2, 0), Ltb),
        ((2, 1), Ltb),
        ((2, 3), Vtb),
        ((3, 0), Ltb),
        ((3, 1), Vtb),
        ((3, 3), Vtb),
    ];
    for ((cm, cc), want) in table {
        let got = aggregate_label(cm, cc).map_err(|e| format!("({cm},{cc}): {e}"))?;
        if got != want {
            return Err(format!("({cm},{cc}): got {got:?}, want {want:?}"));
        }
    }
    for (cm, cc) in [(4, 0), (0, 2), (0, 4)] {
        if aggregate_label(cm, cc).is_ok() {
            return Err(format!("({cm},{cc}) accepted"));
        }
    }
    Ok(format!("{} entries", table.len()))
}

// ---- labeling rules ----------------------------------------------------

#[derive(Deserialize)]
pub struct RuleCase {
    pub kind: String,
    pub warning_type: WarningType,
    pub qualifier: String,
    pub line: u32,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub diff: String,
    pub expected: u8,
    pub why: String,
}

impl RuleCase {
    pub fn warning(&self) -> Warning {
        Warning {
            id: "w".into(),
            warning_type: self.warning_type,
            qualifier: self.qualifier.clone(),
            file: "src/a.c".into(),
            line: self.line,
            procedure: "f".into(),
            revision_index: 0,
        }
    }

    pub fn score(&self, cfg: &KeywordConfig) -> Result<u8, String> {
        let w = self.warning();
        let ids = extract_context_identifiers(&w);
        match self.kind.as_str() {
            "semantic" => Ok(semantic_score(&self.message, &w, &ids, cfg)),
            "structural" => {
                let diff = parse_unified_diff(self.diff.as_bytes()).map_err(|e| e.to_string())?;
                Ok(structural_score(&diff, &w, &ids, cfg))
            }
            k => Err(format!("unknown case kind {k}")),
        }
    }
}

pub fn rule_cases(path: &Path) -> Vec<RuleCase> {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn rule_fixtures(path: &Path) -> Check {
    let cfg = KeywordConfig::default();
    let cases = rule_cases(path);
    for c in &cases {
        let got = c.score(&cfg)?;
        if got != c.expected {
            return Err(format!(
                "{} {:?} ({}): got {got}, want {}",
                c.kind, c.warning_type, c.why, c.expected
            ));
        }
    }
    for t in WarningType::ALL {
        let has = |kind: &str, tier: u8| cases.iter().any(|c| c.kind == kind && c.warning_type == t && c.expected == tier);
        if let Some(tier) = [0, 1, 2, 3].into_iter().find(|&s| !has("semantic", s)) {
            return Err(format!("no semantic tier-{tier} fixture for {t}"));
        }
        if let Some(tier) = [0, 1, 3].into_iter().find(|&s| !has("structural", s)) {
            return Err(format!("no structural tier-{tier} fixture for {t}"));
        }
    }
    Ok(format!("{} fixtures", cases.len()))
}

// ---- mining ------------------------------------------------------------

pub const LIFECYCLE_NOW: i64 = 1_700_000_000;

/// (procedure, first_seen, last_seen, disappeared_at, status, reason)
type Episode = (&'static str, usize, usize, Option<usize>, WarningStatus, Option<FalseAlarmReason>);

pub const LIFECYCLE_EPISODES: [Episode; 6] = [
    ("parse_header", 0, 2, Some(3), WarningStatus::Actionable, None),
    ("legacy", 0, 3, Some(4), WarningStatus::FalseAlarm, Some(FalseAlarmReason::FileDeleted)),
    ("checksum", 0, 5, None, WarningStatus::FalseAlarm, Some(FalseAlarmReason::AgedOut)),
    ("read_all", 1, 1, Some(2), WarningStatus::Actionable, None),
    ("open_stream", 4, 5, None, WarningStatus::Undecided, None),
    ("read_all", 4, 5, None, WarningStatus::Undecided, None),
];

pub fn mining(fixture: &Path) -> Check {
    let revs = load_history(&HistorySource::fixture(fixture), None, &AcwConfig::default()).map_err(|e| e.to_string())?;
    let mined = mine(&revs, LIFECYCLE_NOW, "fixture", "fixture", None).map_err(|e| e.to_string())?;
    if mined.warnings.len() != LIFECYCLE_EPISODES.len() {
        return Err(format!("{} episodes, want {}", mined.warnings.len(), LIFECYCLE_EPISODES.len()));
    }
    for (procedure, first, last, gone, status, reason) in LIFECYCLE_EPISODES {
        let t = mined
            .warnings
            .iter()
            .find(|t| t.fingerprint.procedure == procedure && t.first_seen == first)
            .ok_or_else(|| format!("no episode {procedure}@{first}"))?;
        let got = (t.last_seen, t.disappeared_at, t.status, t.reason);
        if got != (last, gone, status, reason) {
            return Err(format!("{procedure}@{first}: got {got:?}"));
        }
    }
    Ok(format!("{} episodes over {} revisions", mined.warnings.len(), revs.len()))
}

// ---- metrics -----------------------------------------------------------

fn direct_dcg(gains: &[u8], k: usize) -> f64 {
    let mut s = 0.0;
    for (pos, &g) in gains.iter().enumerate() {
        if pos >= k {
            break;
        }
        let rank = (pos + 1) as f64;
        s += (f64::from(1u32 << g) - 1.0) / ((rank + 1.0).ln() / std::f64::consts::LN_2);
    }
    s
}

fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Every gain list over {0..3} of length 1..=6, against the best DCG found by
/// enumerating all orderings.
pub fn ndcg_exhaustive() -> Check {
    let mut lists = 0usize;
    for n in 1..=6u32 {
        for code in 0..4usize.pow(n) {
            let gains: Vec<u8> = (0..n).map(|i| ((code >> (2 * i)) & 3) as u8).collect();
            let perms = permutations(&gains);
            for k in [1, 3, 5] {
                let best = perms.iter().map(|p| direct_dcg(p, k)).fold(0.0, f64::max);
                let want = if best == 0.0 { 0.0 } else { direct_dcg(&gains, k) / best };
                let got = ndcg_at_k(&gains, k);
                if (got - want).abs() > 1e-9 {
                    return Err(format!("gains {gains:?} k={k}: got {got}, want {want}"));
                }
            }
            lists += 1;
        }
    }
    let spot = ndcg_at_k(&[1, 3, 0], 3);
    if (spot - 0.7098).abs() > 1e-4 {
        return Err(format!("gains [1,3,0] k=3: got {spot}"));
    }
    Ok(format!("{lists} lists x k in {{1,3,5}}"))
}

pub fn mrr_fixtures() -> Check {
    let (t, f) = (true, false);
    let sets: Vec<(Vec<Vec<bool>>, f64)> = vec![
        (vec![vec![t]], 1.0),
        (vec![vec![f, t]], 0.5),
        (vec![vec![f, f, t]], 1.0 / 3.0),
        (vec![vec![f, f, f]], 0.0),
        (vec![vec![t], vec![f, t]], 0.75),
        (vec![vec![f, t], vec![f, f, t]], 5.0 / 12.0),
        (vec![vec![f, f, f, t], vec![t, t], vec![f, f, f, f, f, f, f, f, f, t]], 0.45),
        (vec![vec![]], 0.0),
        (vec![], 0.0),
        (vec![vec![f, t, t, t], vec![f, f, f, f, t], vec![t, f], vec![f, f, f, f, f]], 0.425),
    ];
    for (i, (queries, want)) in sets.iter().enumerate() {
        let got = mrr(queries);
        if (got - want).abs() > 1e-9 {
            return Err(format!("set {i}: got {got}, want {want}"));
        }
    }
    Ok(format!("{} query sets", sets.len()))
}

// ---- gradients ---------------------------------------------------------

const FD_STEP: f64 = 1e-5;
// Relative error is taken against max(|analytic|, |numeric|, this floor) so
// that parameters with (near-)zero gradient don't divide by zero.
const REL_FLOOR: f64 = 1e-6;

fn random_embedding(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector<f64> {
    let mut e = EmbeddingVector::zeros(dim);
    for _ in 0..4 {
        e.values[rng.random_range(0..dim)] += rng.random_range(-1.0..1.0);
    }
    let norm = e.norm();
    if norm > 0.0 {
        e.values.iter_mut().for_each(|v| *v /= norm);
    }
    e
}

/// Largest relative error between `analytic` and central differences of `loss`.
fn max_rel_error(params: &ModelParams<f64>, analytic: &[f64], loss: impl Fn(&ModelParams<f64>) -> f64) -> f64 {
    let base = params.weights.flatten();
    let mut worst = 0.0f64;
    let mut p = params.clone();
    for i in 0..base.len() {
        let mut v = base.clone();
        v[i] = base[i] + FD_STEP;
        p.weights.unflatten(&v).unwrap();
        let up = loss(&p);
        v[i] = base[i] - FD_STEP;
        p.weights.unflatten(&v).unwrap();
        let down = loss(&p);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// Both losses at 5 random parameter points; returns the worst relative error.
pub fn gradient_checks() -> Check {
    const D: usize = 24;
    const H: usize = 6;
    let mut worst = 0.0f64;
    for point in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + point);
        let params = ModelParams::<f64>::init_full(D, H, 7 + point).map_err(|e| e.to_string())?;
        let data: Vec<(EmbeddingVector<f64>, WeakLabelClass)> = (0..12)
            .map(|i| (random_embedding(&mut rng, D), WeakLabelClass::ORDER[(i * 7 + point as usize) % 4]))
            .collect();
        let binary: Vec<(EmbeddingVector<f64>, bool)> =
            data.iter().map(|(e, c)| (e.clone(), *c != WeakLabelClass::FalseWarning)).collect();

        for weighting in [ClassWeighting::None, ClassWeighting::InverseFrequency] {
            let det = detector_objective(&params, &binary, weighting).map_err(|e| e.to_string())?;
            let err = max_rel_error(&params, &det.grad.flatten(), |p| {
                detector_objective(p, &binary, weighting).unwrap().loss
            });
            if err >= 1e-4 {
                return Err(format!("detector loss, point {point}, {weighting:?}: relative error {err:.3e}"));
            }
            worst = worst.max(err);

            let rr = reranker_objective(&params, &data, weighting).map_err(|e| e.to_string())?;
            let err = max_rel_error(&params, &rr.grad.flatten(), |p| {
                reranker_objective(p, &data, weighting).unwrap().loss
            });
            if err >= 1e-4 {
                return Err(format!("reranker loss, point {point}, {weighting:?}: relative error {err:.3e}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("max relative error {worst:.2e}"))
}

// ---- ranking score -----------------------------------------------------

pub fn random_probs(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(1e-9..1.0));
    let s: f64 = u.iter().sum();
    u.map(|x| x / s)
}

/// Argmax (last index wins ties) and base score ± probability, recomputed
/// without the library.
pub fn brute_score(p: &[f64; 4]) -> (usize, f64) {
    let mut best = 0;
    for i in 1..4 {
        if p[i] >= p[best] {
            best = i;
        }
    }
    let base = best as f64;
    (best, if best == 0 { base - p[best] } else { base + p[best] })
}

const RANGES: [(f64, f64); 4] = [(-1.0, -0.25), (1.25, 2.0), (2.25, 3.0), (3.25, 4.0)];

/// Scores of random probability vectors stay in their class range, and the
/// ranking never puts a lower predicted class above a higher one.
pub fn score_ordering(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for _ in 0..n {
        let p = random_probs(&mut rng);
        let (class, score) = rank_score(&p).map_err(|e| e.to_string())?;
        let (lo, hi) = RANGES[class.index()];
        if !(lo..=hi).contains(&score) {
            return Err(format!("{p:?}: {class:?} score {score} outside [{lo}, {hi}]"));
        }
        scores.push(score);
        classes.push(class.index());
    }
    let order = rank_order(&scores);
    if let Some(w) = order.windows(2).find(|w| classes[w[0]] < classes[w[1]]) {
        return Err(format!("class {} ranked above class {}", classes[w[0]], classes[w[1]]));
    }
    Ok(format!("{n} vectors"))
}

/// `rank_score` + `rank_order` against the recomputed scores sorted by a
/// plain comparison sort.
pub fn rank_vs_brute_force(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs: Vec<[f64; 4]> = (0..n).map(|_| random_probs(&mut rng)).collect();
    let mut scores = Vec::with_capacity(n);
    for p in &probs {
        let (class, score) = rank_score(p).map_err(|e| e.to_string())?;
        let (bc, bs) = brute_score(p);
        if class.index() != bc || (score - bs).abs() > 1e-12 {
            return Err(format!("{p:?}: library ({class:?}, {score}), recomputed ({bc}, {bs})"));
        }
        scores.push(score);
    }
    let mut expected: Vec<usize> = (0..n).collect();
    // Insertion sort: descending recomputed score, input order on ties.
    for i in 1..n {
        let mut j = i;
        while j > 0 && brute_score(&probs[expected[j - 1]]).1 < brute_score(&probs[expected[j]]).1 {
            expected.swap(j - 1, j);
            j -= 1;
        }
    }
    if rank_order(&scores) != expected {
        return Err("ranking differs from brute-force order".into());
    }
    Ok(format!("{n} vectors"))
}
