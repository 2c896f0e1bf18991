//! Train/evaluate orchestration over a labeled corpus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{corpus_digest, project_split, stratified_split, LabeledRecord, Split};
use crate::encoder::{EmbeddingVector, Encoder, HashingEncoder};
use crate::error::{Error, Result};
use crate::eval::{
    build_queries, evaluate_ranking, precision_recall_f1, MetricReport, Protocol, RandomRanker, ScoreRanker,
};
use crate::nn::{
    train_detector, train_reranker, warm_start_reranker, ModelFile, ModelParams, Stage, TrainingConfig,
    TrainingMetadata,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Stratified,
    Project,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::Stratified => "stratified",
            SplitMode::Project => "project",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub stage: Stage,
    /// Start the reranker from the trained detector; `false` trains it from a
    /// fresh initialization (the ablation).
    pub warm_start: bool,
    pub split_mode: SplitMode,
    pub test_fraction: f64,
    pub seed: u64,
    pub detector: TrainingConfig,
    pub reranker: TrainingConfig,
    pub decision_threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            embed_dim: crate::encoder::DEFAULT_EMBED_DIM,
            hidden_dim: crate::nn::DEFAULT_HIDDEN_DIM,
            stage: Stage::Full,
            warm_start: true,
            split_mode: SplitMode::Stratified,
            test_fraction: 0.2,
            seed: 0,
            detector: TrainingConfig::default(),
            reranker: TrainingConfig::default(),
            decision_threshold: 0.5,
        }
    }
}

pub fn embed_records<T: Scalar>(records: &[LabeledRecord], encoder: &dyn Encoder<T>) -> Result<Vec<EmbeddingVector<T>>> {
    records.par_iter().map(|r| encoder.encode(&r.channels())).collect()
}

/// Splits, trains both stages on the training side and packs the result with
/// its metadata.
pub fn train_model<T: Scalar>(records: &[LabeledRecord], opts: &TrainOptions) -> Result<ModelFile<T>> {
    if records.is_empty() {
        return Err(Error::Training("the labeled corpus is empty".into()));
    }
    if !(0.0..1.0).contains(&opts.test_fraction) {
        return Err(Error::Config(format!("test fraction {} must be in [0, 1)", opts.test_fraction)));
    }
    let split = match opts.split_mode {
        SplitMode::Stratified => stratified_split(records, opts.test_fraction, opts.seed),
        SplitMode::Project => project_split(records, opts.test_fraction, opts.seed),
    };
    let encoder = HashingEncoder::new(opts.embed_dim)?;
    let train: Vec<&LabeledRecord> = split.train.iter().map(|&i| &records[i]).collect();
    let embeddings: Vec<EmbeddingVector<T>> =
        train.par_iter().map(|r| encoder.encode(&r.channels())).collect::<Result<_>>()?;

    let detector_cfg = TrainingConfig {
        seed: opts.seed,
        ..opts.detector.clone()
    };
    let reranker_cfg = TrainingConfig {
        seed: opts.seed,
        ..opts.reranker.clone()
    };
    let mut meta = TrainingMetadata {
        corpus_digest: corpus_digest(records),
        split_mode: opts.split_mode.as_str().into(),
        test_fraction: opts.test_fraction,
        decision_threshold: opts.decision_threshold,
        ..Default::default()
    };

    let binary: Vec<(EmbeddingVector<T>, bool)> = embeddings
        .iter()
        .zip(&train)
        .map(|(e, r)| (e.clone(), r.is_actionable()))
        .collect();
    let detector = train_detector(&binary, opts.hidden_dim, &detector_cfg)?;
    meta.detector_config = Some(detector_cfg);
    meta.detector_loss = detector.loss_trace;

    let params = if opts.stage == Stage::Full {
        let start = if opts.warm_start {
            warm_start_reranker(&detector.params)
        } else {
            ModelParams::init_full(opts.embed_dim, opts.hidden_dim, opts.seed.wrapping_add(1))?
        };
        let four: Vec<_> = embeddings
            .into_iter()
            .zip(&train)
            .map(|(e, r)| (e, r.aggregated))
            .collect();
        let reranker = train_reranker(&four, &start, &reranker_cfg)?;
        meta.reranker_config = Some(reranker_cfg);
        meta.reranker_loss = reranker.loss_trace;
        reranker.params
    } else {
        detector.params
    };
    meta.split = Some(split);
    Ok(ModelFile::new(params, meta))
}

/// Reports for the model and the random baseline on the persisted test split.
pub fn evaluate_model<T: Scalar>(
    model: &ModelFile<T>,
    records: &[LabeledRecord],
    protocol: &Protocol,
) -> Result<(MetricReport, MetricReport)> {
    let meta = &model.training_metadata;
    let digest = corpus_digest(records);
    if meta.corpus_digest != digest {
        return Err(Error::Integrity(format!(
            "labeled corpus digest {digest} does not match the model's training corpus {}",
            meta.corpus_digest
        )));
    }
    let Some(Split { test, .. }) = &meta.split else {
        return Err(Error::Model("model file has no persisted split".into()));
    };
    if test.is_empty() {
        return Err(Error::Contract("the persisted test split is empty".into()));
    }
    let params = model.params();
    let encoder = HashingEncoder::new(params.embed_dim)?;
    let test_records: Vec<&LabeledRecord> = test.iter().map(|&i| &records[i]).collect();
    let embeddings: Vec<EmbeddingVector<T>> = test_records
        .par_iter()
        .map(|r| encoder.encode(&r.channels()))
        .collect::<Result<_>>()?;

    let detector_probs: Vec<f64> = embeddings
        .par_iter()
        .map(|e| params.detector_forward(e).map(|p| p.to_f64_lossy()))
        .collect::<Result<_>>()?;
    let rank_scores: Vec<f64> = match params.stage {
        Stage::Full => params
            .predict_all(&embeddings)?
            .into_iter()
            .map(|p| p.score.to_f64_lossy())
            .collect(),
        Stage::DetectorOnly => detector_probs.clone(),
    };
    let gold: Vec<bool> = test_records.iter().map(|r| r.is_actionable()).collect();
    let predicted: Vec<bool> = detector_probs.iter().map(|&p| p >= meta.decision_threshold).collect();

    // Scores indexed by corpus record, as the queries refer to records.
    let mut by_record = vec![f64::NEG_INFINITY; records.len()];
    for (&i, &s) in test.iter().zip(&rank_scores) {
        by_record[i] = s;
    }
    let queries = build_queries(records, test, protocol)?;
    let model_ranker = ScoreRanker {
        name: "two-stage".into(),
        scores: &by_record,
    };
    let random = RandomRanker { seed: protocol.seed };
    let report = |name: &str, detection, ranking| MetricReport {
        ranker: name.into(),
        detection,
        decision_threshold: meta.decision_threshold,
        ranking,
        protocol: protocol.clone(),
        test_size: test.len(),
        corpus_digest: digest.clone(),
    };
    Ok((
        report(
            "two-stage",
            precision_recall_f1(&predicted, &gold)?,
            evaluate_ranking(&queries, &model_ranker, &protocol.ks),
        ),
        report(
            "random",
            precision_recall_f1(&random.select(gold.len()), &gold)?,
            evaluate_ranking(&queries, &random, &protocol.ks),
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{labeled_corpus, SynthConfig};

    fn small() -> (Vec<LabeledRecord>, TrainOptions) {
        let records = labeled_corpus(&SynthConfig {
            vtb: 6,
            ltb: 8,
            utb: 26,
            false_warnings: 160,
            ..Default::default()
        });
        let opts = TrainOptions {
            embed_dim: 128,
            hidden_dim: 8,
            detector: TrainingConfig {
                epochs: 20,
                ..Default::default()
            },
            reranker: TrainingConfig {
                epochs: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        (records, opts)
    }

    #[test]
    fn train_then_evaluate() {
        let (records, opts) = small();
        let model = train_model::<f64>(&records, &opts).unwrap();
        assert_eq!(model.stage, Stage::Full);
        assert_eq!(model.training_metadata.split.as_ref().unwrap().test.len(), 40);
        let protocol = Protocol {
            n_queries: 10,
            ..Default::default()
        };
        let (m, r) = evaluate_model(&model, &records, &protocol).unwrap();
        assert_eq!(m.ranking.per_query.len(), 10);
        assert_eq!(r.ranker, "random");
        assert_eq!(train_model::<f64>(&records, &opts).unwrap().to_json(), model.to_json());

        let mut other = records.clone();
        other.pop();
        assert!(matches!(evaluate_model(&model, &other, &protocol), Err(Error::Integrity(_))));
    }

    #[test]
    fn detector_stage_only() {
        let (records, mut opts) = small();
        opts.stage = Stage::DetectorOnly;
        let model = train_model::<f32>(&records, &opts).unwrap();
        assert_eq!(model.stage, Stage::DetectorOnly);
        assert!(model.weights.reranker_w.is_none());
        assert!(model.training_metadata.reranker_loss.is_empty());
    }
}
