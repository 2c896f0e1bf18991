//! Ranking score and ordered warning lists.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{channels, EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::ingest::SourceSnapshot;
use crate::model::{Warning, WeakLabelClass};
use crate::nn::params::{class_of, ModelParams, NUM_CLASSES};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub detector_prob: T,
    /// In class order (FalseWarning, UTB, LTB, VTB).
    pub class_probs: [T; NUM_CLASSES],
    pub predicted_class: WeakLabelClass,
    pub score: T,
}

/// Highlight colour in ranked output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Red,
    Orange,
    None,
}

impl Band {
    pub fn of(class: WeakLabelClass) -> Band {
        match class {
            WeakLabelClass::Vtb => Band::Red,
            WeakLabelClass::Ltb => Band::Orange,
            _ => Band::None,
        }
    }
}

const SUM_TOL: f64 = 1e-6;

/// Argmax class (ties go to the higher class) and score: the class base
/// score plus the argmax probability, or minus it for `FalseWarning`.
pub fn rank_score<T: Scalar>(probs: &[T; NUM_CLASSES]) -> Result<(WeakLabelClass, T)> {
    let tol = T::of(SUM_TOL);
    if probs.iter().any(|p| !p.is_finite() || *p < -tol || *p > T::one() + tol) {
        return Err(Error::Contract(format!("probabilities out of range: {probs:?}")));
    }
    let sum: T = probs.iter().copied().sum();
    if (sum - T::one()).abs() > tol {
        return Err(Error::Contract(format!("probabilities sum to {sum}, not 1")));
    }
    let mut best = NUM_CLASSES - 1;
    for i in (0..NUM_CLASSES - 1).rev() {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    let class = class_of(best);
    let base = T::of_usize(class.base_score() as usize);
    let p = probs[best];
    let score = if class == WeakLabelClass::FalseWarning { base - p } else { base + p };
    Ok((class, score))
}

impl<T: Scalar> ModelParams<T> {
    pub fn predict(&self, e: &EmbeddingVector<T>) -> Result<Prediction<T>> {
        let detector_prob = self.detector_forward(e)?;
        let class_probs = self.reranker_forward(e)?;
        let (predicted_class, score) = rank_score(&class_probs)?;
        Ok(Prediction {
            detector_prob,
            class_probs,
            predicted_class,
            score,
        })
    }

    /// Predictions for many embeddings, computed in parallel.
    pub fn predict_all(&self, embeddings: &[EmbeddingVector<T>]) -> Result<Vec<Prediction<T>>> {
        embeddings.par_iter().map(|e| self.predict(e)).collect()
    }
}

/// Indices sorted by descending score; equal scores keep input order.
pub fn rank_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWarning<T> {
    /// 1-based position.
    pub rank: usize,
    pub warning: Warning,
    pub prediction: Prediction<T>,
    pub band: Band,
}

/// Encodes, scores and orders warnings; most likely bugs first.
pub fn rank<T: Scalar>(
    params: &ModelParams<T>,
    encoder: &dyn Encoder<T>,
    warnings: &[Warning],
    snapshot: Option<&SourceSnapshot>,
) -> Result<Vec<RankedWarning<T>>> {
    if encoder.dim() != params.embed_dim {
        return Err(Error::Contract(format!(
            "encoder dimension {} does not match model dimension {}",
            encoder.dim(),
            params.embed_dim
        )));
    }
    let predictions: Vec<Prediction<T>> = warnings
        .par_iter()
        .map(|w| params.predict(&encoder.encode(&channels(w, snapshot))?))
        .collect::<Result<_>>()?;
    let scores: Vec<T> = predictions.iter().map(|p| p.score).collect();
    Ok(rank_order(&scores)
        .into_iter()
        .enumerate()
        .map(|(pos, i)| RankedWarning {
            rank: pos + 1,
            warning: warnings[i].clone(),
            band: Band::of(predictions[i].predicted_class),
            prediction: predictions[i].clone(),
        })
        .collect())
}
