//! Detection and ranking metrics and the query protocol.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledRecord;
use crate::error::{Error, Result};
use crate::model::WeakLabelClass;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of binary predictions. Zero predicted positives
/// gives precision 0; `p + r = 0` gives F1 0.
pub fn precision_recall_f1(predictions: &[bool], gold: &[bool]) -> Result<Prf> {
    if predictions.len() != gold.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf { precision, recall, f1 })
}

/// Exponential-gain DCG over the first `k` positions.
pub fn dcg_at_k(gains: &[u8], k: usize) -> f64 {
    gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| (2f64.powi(i32::from(g)) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// DCG normalized by the DCG of the ideal (descending) order; 0 when the
/// ideal DCG is 0.
pub fn ndcg_at_k(gains: &[u8], k: usize) -> f64 {
    let mut ideal = gains.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg_at_k(gains, k) / idcg
    }
}

/// `1 / rank` of the first relevant item, 0 when there is none.
pub fn reciprocal_rank(relevant_in_ranked_order: &[bool]) -> f64 {
    relevant_in_ranked_order
        .iter()
        .position(|&r| r)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Mean reciprocal rank over queries, each given as AWHB flags in ranked order.
pub fn mrr(queries: &[Vec<bool>]) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    queries.iter().map(|q| reciprocal_rank(q)).sum::<f64>() / queries.len() as f64
}

/// Gain per class, in class order (FalseWarning, UTB, LTB, VTB).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GainMap(pub [u8; 4]);

impl Default for GainMap {
    fn default() -> Self {
        GainMap([0, 1, 2, 3])
    }
}

impl GainMap {
    pub fn gain(&self, class: WeakLabelClass) -> u8 {
        self.0[class.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryItem {
    /// Index into the labeled corpus.
    pub record: usize,
    pub warning_id: String,
    pub gain: u8,
    pub is_awhb: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: usize,
    pub items: Vec<QueryItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub n_queries: usize,
    pub query_size: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub gains: GainMap,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            n_queries: 100,
            query_size: 10,
            ks: vec![1, 3, 5],
            seed: 0,
            gains: GainMap::default(),
        }
    }
}

const MAX_RESAMPLES: usize = 10_000;

/// Samples `n_queries` queries of `query_size` distinct warnings from the
/// records at `pool`. Draws are independent across queries; a draw without
/// any AWHB is discarded and redrawn.
pub fn build_queries(records: &[LabeledRecord], pool: &[usize], protocol: &Protocol) -> Result<Vec<Query>> {
    let size = protocol.query_size;
    if size == 0 || pool.len() < size {
        return Err(Error::Contract(format!(
            "query size {size} needs at least that many test warnings, have {}",
            pool.len()
        )));
    }
    if let Some(&bad) = pool.iter().find(|&&i| i >= records.len()) {
        return Err(Error::Contract(format!("pool index {bad} is out of range")));
    }
    if !pool.iter().any(|&i| records[i].aggregated.is_awhb()) {
        return Err(Error::Contract(
            "the test warnings contain no AWHB (VTB or LTB); ranking metrics are undefined".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let mut queries = Vec::with_capacity(protocol.n_queries);
    for id in 0..protocol.n_queries {
        let mut attempts = 0;
        let picked = loop {
            let picked = rand::seq::index::sample(&mut rng, pool.len(), size);
            if picked.iter().any(|j| records[pool[j]].aggregated.is_awhb()) {
                break picked;
            }
            attempts += 1;
            if attempts == MAX_RESAMPLES {
                return Err(Error::Contract(format!(
                    "no query with an AWHB after {MAX_RESAMPLES} draws; AWHB are too rare for query size {size}"
                )));
            }
        };
        let items = picked
            .iter()
            .map(|j| {
                let r = &records[pool[j]];
                QueryItem {
                    record: pool[j],
                    warning_id: r.warning.id.clone(),
                    gain: protocol.gains.gain(r.aggregated),
                    is_awhb: r.aggregated.is_awhb(),
                }
            })
            .collect();
        queries.push(Query { id, items });
    }
    Ok(queries)
}

/// Orders the items of a query, returning positions into `query.items`.
pub trait Ranker: Sync {
    fn name(&self) -> &str;
    fn order(&self, query: &Query) -> Vec<usize>;
}

/// Ranks by a per-record score, highest first, stable on ties.
pub struct ScoreRanker<'a> {
    pub name: String,
    /// Indexed by corpus record index.
    pub scores: &'a [f64],
}

impl Ranker for ScoreRanker<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn order(&self, query: &Query) -> Vec<usize> {
        let scores: Vec<f64> = query.items.iter().map(|it| self.scores[it.record]).collect();
        crate::nn::rank_order(&scores)
    }
}

/// Uniformly random order, seeded per query.
pub struct RandomRanker {
    pub seed: u64,
}

impl RandomRanker {
    /// Random binary predictions with probability 1/2, for a detection baseline.
    pub fn select(&self, n: usize) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n).map(|_| rng.random_bool(0.5)).collect()
    }
}

impl Ranker for RandomRanker {
    fn name(&self) -> &str {
        "random"
    }

    fn order(&self, query: &Query) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (query.id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut idx: Vec<usize> = (0..query.items.len()).collect();
        idx.shuffle(&mut rng);
        idx
    }
}

/// Ranks every item at its gold position: the metric upper bound.
pub struct OracleRanker;

impl Ranker for OracleRanker {
    fn name(&self) -> &str {
        "oracle"
    }

    fn order(&self, query: &Query) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..query.items.len()).collect();
        idx.sort_by(|&a, &b| query.items[b].gain.cmp(&query.items[a].gain));
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: usize,
    pub ndcg: Vec<AtK>,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub ndcg: Vec<AtK>,
    pub mrr: f64,
    pub per_query: Vec<QueryResult>,
}

impl RankingMetrics {
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ndcg.iter().find(|a| a.k == k).map(|a| a.value)
    }
}

pub fn evaluate_ranking(queries: &[Query], ranker: &dyn Ranker, ks: &[usize]) -> RankingMetrics {
    let per_query: Vec<QueryResult> = queries
        .par_iter()
        .map(|q| {
            let order = ranker.order(q);
            let gains: Vec<u8> = order.iter().map(|&i| q.items[i].gain).collect();
            let awhb: Vec<bool> = order.iter().map(|&i| q.items[i].is_awhb).collect();
            QueryResult {
                query: q.id,
                ndcg: ks.iter().map(|&k| AtK { k, value: ndcg_at_k(&gains, k) }).collect(),
                reciprocal_rank: reciprocal_rank(&awhb),
            }
        })
        .collect();
    let n = per_query.len().max(1) as f64;
    let ndcg = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| AtK {
            k,
            value: per_query.iter().map(|r| r.ndcg[j].value).sum::<f64>() / n,
        })
        .collect();
    let mrr = per_query.iter().map(|r| r.reciprocal_rank).sum::<f64>() / n;
    RankingMetrics { ndcg, mrr, per_query }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ranker: String,
    pub detection: Prf,
    pub decision_threshold: f64,
    pub ranking: RankingMetrics,
    pub protocol: Protocol,
    pub test_size: usize,
    pub corpus_digest: String,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Aligned plain-text table with one row per report.
pub fn metric_table(reports: &[MetricReport]) -> String {
    let ks: Vec<usize> = reports.first().map(|r| r.protocol.ks.clone()).unwrap_or_default();
    let width = reports.iter().map(|r| r.ranker.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>9}  {:>6}  {:>6}", "ranker", "precision", "recall", "f1");
    for k in &ks {
        let _ = write!(out, "  {:>7}", format!("nDCG@{k}"));
    }
    out.push_str("     MRR\n");
    for r in reports {
        let d = r.detection;
        let _ = write!(
            out,
            "{:<width$}  {:>9.3}  {:>6.3}  {:>6.3}",
            r.ranker, d.precision, d.recall, d.f1
        );
        for k in &ks {
            let _ = write!(out, "  {:>7.3}", r.ranking.ndcg_at(*k).unwrap_or(f64::NAN));
        }
        let _ = writeln!(out, "  {:>6.3}", r.ranking.mrr);
    }
    out
}
