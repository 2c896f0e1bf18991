//! Mini-batch gradient descent for both heads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingVector;
use crate::error::{Error, Result};
use crate::model::WeakLabelClass;
use crate::nn::params::{sigmoid, softmax, ModelParams, SparseRow, Stage, Weights, NUM_CLASSES};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
    /// Stop once the epoch loss moves by less than this.
    pub convergence_tol: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 64,
            class_weighting: ClassWeighting::InverseFrequency,
            seed: 0,
            convergence_tol: 1e-6,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return Err(Error::Config("convergence tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<T> {
    pub params: ModelParams<T>,
    /// Full-dataset loss after each epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Head {
    Detector,
    Reranker,
}

/// Loss over a dataset together with its gradient in the shape of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: Weights<T>,
}

impl<T: Scalar> Weights<T> {
    pub fn zeros_like(&self) -> Self {
        let z = |v: &[T]| vec![T::zero(); v.len()];
        Weights {
            body_w: z(&self.body_w),
            body_b: z(&self.body_b),
            detector_w: z(&self.detector_w),
            detector_b: T::zero(),
            reranker_w: self.reranker_w.as_deref().map(z),
            reranker_b: self.reranker_b.as_deref().map(z),
        }
    }

    /// All parameters in a fixed order: body, detector head, reranker head.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.body_w);
        out.extend_from_slice(&self.body_b);
        out.extend_from_slice(&self.detector_w);
        out.push(self.detector_b);
        out.extend(self.reranker_w.iter().flatten());
        out.extend(self.reranker_b.iter().flatten());
        out
    }

    /// Inverse of [`Weights::flatten`].
    pub fn unflatten(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.flatten().len() {
            return Err(Error::Contract("parameter vector has the wrong length".into()));
        }
        let mut it = values.iter().copied();
        let mut fill = |v: &mut [T]| v.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
        fill(&mut self.body_w);
        fill(&mut self.body_b);
        fill(&mut self.detector_w);
        fill(std::slice::from_mut(&mut self.detector_b));
        if let Some(rw) = self.reranker_w.as_mut() {
            fill(rw);
        }
        if let Some(rb) = self.reranker_b.as_mut() {
            fill(rb);
        }
        Ok(())
    }
}

/// Per-class loss weights. Absent classes get weight 0.
fn class_weights<T: Scalar>(targets: &[usize], classes: usize, weighting: ClassWeighting) -> Vec<T> {
    let mut counts = vec![0usize; classes];
    for &t in targets {
        counts[t] += 1;
    }
    match weighting {
        ClassWeighting::None => vec![T::one(); classes],
        ClassWeighting::InverseFrequency => {
            let present = counts.iter().filter(|&&c| c > 0).count();
            counts
                .iter()
                .map(|&c| {
                    if c == 0 {
                        T::zero()
                    } else {
                        T::of_usize(targets.len()) / T::of_usize(present * c)
                    }
                })
                .collect()
        }
    }
}

/// Adds `scale * d(class_weight * loss_i)/dθ` for one example to `grad` and
/// returns the unscaled weighted loss.
fn accumulate<T: Scalar>(
    p: &ModelParams<T>,
    head: Head,
    x: &[(usize, T)],
    target: usize,
    cw: T,
    scale: T,
    grad: &mut Weights<T>,
) -> T {
    let hidden = p.hidden_sparse(x);
    let hd = p.hidden_dim;
    let mut dh = vec![T::zero(); hd];
    let loss = match head {
        Head::Detector => {
            let l = p.detector_logit(&hidden);
            let y = T::of_usize(target);
            // log(1 + e^l) - y l, in a form that does not overflow
            let loss = l.max(T::zero()) - l * y + (-l.abs()).exp().ln_1p();
            let g = (sigmoid(l) - y) * cw * scale;
            for j in 0..hd {
                grad.detector_w[j] += g * hidden[j];
                dh[j] = g * p.weights.detector_w[j];
            }
            grad.detector_b += g;
            loss
        }
        Head::Reranker => {
            let logits = p.reranker_logits(&hidden).expect("stage checked by caller");
            let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<T>().ln();
            let loss = lse - logits[target];
            let probs = softmax(logits);
            let rw = p.weights.reranker_w.as_ref().expect("stage checked by caller");
            let (gw, gb) = (
                grad.reranker_w.as_mut().expect("grad shaped like params"),
                grad.reranker_b.as_mut().expect("grad shaped like params"),
            );
            for c in 0..NUM_CLASSES {
                let onehot = if c == target { T::one() } else { T::zero() };
                let d = (probs[c] - onehot) * cw * scale;
                gb[c] += d;
                for j in 0..hd {
                    gw[c * hd + j] += d * hidden[j];
                    dh[j] += d * rw[c * hd + j];
                }
            }
            loss
        }
    };
    let d = p.embed_dim;
    for j in 0..hd {
        let dz = dh[j] * (T::one() - hidden[j] * hidden[j]);
        grad.body_b[j] += dz;
        for &(i, v) in x {
            grad.body_w[j * d + i] += dz * v;
        }
    }
    cw * loss
}

fn mean_loss<T: Scalar>(p: &ModelParams<T>, head: Head, rows: &[SparseRow<T>], targets: &[usize], cw: &[T]) -> T {
    let total: T = rows
        .iter()
        .zip(targets)
        .map(|(x, &t)| {
            let hidden = p.hidden_sparse(x);
            match head {
                Head::Detector => {
                    let l = p.detector_logit(&hidden);
                    let y = T::of_usize(t);
                    cw[t] * (l.max(T::zero()) - l * y + (-l.abs()).exp().ln_1p())
                }
                Head::Reranker => {
                    let logits = p.reranker_logits(&hidden).expect("stage checked by caller");
                    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
                    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<T>().ln();
                    cw[t] * (lse - logits[t])
                }
            }
        })
        .sum();
    total / T::of_usize(rows.len())
}

fn objective<T: Scalar>(p: &ModelParams<T>, head: Head, rows: &[SparseRow<T>], targets: &[usize], cw: &[T]) -> LossGrad<T> {
    let mut grad = p.weights.zeros_like();
    let scale = T::one() / T::of_usize(rows.len());
    let mut loss = T::zero();
    for (x, &t) in rows.iter().zip(targets) {
        loss += accumulate(p, head, x, t, cw[t], scale, &mut grad);
    }
    LossGrad {
        loss: loss * scale,
        grad,
    }
}

fn sparse_rows<'a, T: Scalar>(
    p: &ModelParams<T>,
    xs: impl Iterator<Item = &'a EmbeddingVector<T>>,
) -> Result<Vec<SparseRow<T>>> {
    xs.map(|e| {
        p.check_input(e)?;
        Ok(e.nonzeros())
    })
    .collect()
}

fn detector_targets<T>(data: &[(EmbeddingVector<T>, bool)]) -> Vec<usize> {
    data.iter().map(|(_, y)| usize::from(*y)).collect()
}

fn reranker_targets<T>(data: &[(EmbeddingVector<T>, WeakLabelClass)]) -> Vec<usize> {
    data.iter().map(|(_, c)| c.index()).collect()
}

fn require_full<T>(p: &ModelParams<T>) -> Result<()> {
    if p.stage != Stage::Full {
        return Err(Error::Contract("reranker training needs a Full-stage model".into()));
    }
    Ok(())
}

/// Mean class-weighted binary cross-entropy of the detector and its gradient.
pub fn detector_objective<T: Scalar>(
    p: &ModelParams<T>,
    data: &[(EmbeddingVector<T>, bool)],
    weighting: ClassWeighting,
) -> Result<LossGrad<T>> {
    let rows = sparse_rows(p, data.iter().map(|(e, _)| e))?;
    let targets = detector_targets(data);
    let cw = class_weights(&targets, 2, weighting);
    Ok(objective(p, Head::Detector, &rows, &targets, &cw))
}

/// Mean class-weighted cross-entropy of the reranker and its gradient.
pub fn reranker_objective<T: Scalar>(
    p: &ModelParams<T>,
    data: &[(EmbeddingVector<T>, WeakLabelClass)],
    weighting: ClassWeighting,
) -> Result<LossGrad<T>> {
    require_full(p)?;
    let rows = sparse_rows(p, data.iter().map(|(e, _)| e))?;
    let targets = reranker_targets(data);
    let cw = class_weights(&targets, NUM_CLASSES, weighting);
    Ok(objective(p, Head::Reranker, &rows, &targets, &cw))
}

fn descend<T: Scalar>(
    mut p: ModelParams<T>,
    head: Head,
    rows: &[SparseRow<T>],
    targets: &[usize],
    cw: &[T],
    cfg: &TrainingConfig,
) -> Trained<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lr = T::of(cfg.learning_rate);
    let d = p.embed_dim;
    let hd = p.hidden_dim;
    let mut grad = p.weights.zeros_like();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut columns: Vec<usize> = Vec::new();
    let mut trace: Vec<f64> = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let scale = T::one() / T::of_usize(batch.len());
            columns.clear();
            for &i in batch {
                accumulate(&p, head, &rows[i], targets[i], cw[targets[i]], scale, &mut grad);
                columns.extend(rows[i].iter().map(|&(c, _)| c));
            }
            columns.sort_unstable();
            columns.dedup();

            // Only the body columns touched by the batch have non-zero gradient.
            let (w, g) = (&mut p.weights, &mut grad);
            for j in 0..hd {
                for &c in &columns {
                    let k = j * d + c;
                    w.body_w[k] -= lr * g.body_w[k];
                    g.body_w[k] = T::zero();
                }
                w.body_b[j] -= lr * g.body_b[j];
                g.body_b[j] = T::zero();
            }
            match head {
                Head::Detector => {
                    for j in 0..hd {
                        w.detector_w[j] -= lr * g.detector_w[j];
                        g.detector_w[j] = T::zero();
                    }
                    w.detector_b -= lr * g.detector_b;
                    g.detector_b = T::zero();
                }
                Head::Reranker => {
                    let (rw, gw) = (w.reranker_w.as_mut().unwrap(), g.reranker_w.as_mut().unwrap());
                    for (a, b) in rw.iter_mut().zip(gw.iter_mut()) {
                        *a -= lr * *b;
                        *b = T::zero();
                    }
                    let (rb, gb) = (w.reranker_b.as_mut().unwrap(), g.reranker_b.as_mut().unwrap());
                    for (a, b) in rb.iter_mut().zip(gb.iter_mut()) {
                        *a -= lr * *b;
                        *b = T::zero();
                    }
                }
            }
        }
        let loss = mean_loss(&p, head, rows, targets, cw).to_f64_lossy();
        let converged = trace.last().is_some_and(|prev| (prev - loss).abs() < cfg.convergence_tol);
        trace.push(loss);
        if converged {
            break;
        }
    }
    Trained { params: p, loss_trace: trace }
}

/// Trains a fresh detector (seeded from `cfg.seed`) on binary labels.
pub fn train_detector<T: Scalar>(
    data: &[(EmbeddingVector<T>, bool)],
    hidden_dim: usize,
    cfg: &TrainingConfig,
) -> Result<Trained<T>> {
    cfg.validate()?;
    let Some((first, _)) = data.first() else {
        return Err(Error::Training("empty training set".into()));
    };
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        let which = if positives == 0 { "negative" } else { "positive" };
        return Err(Error::Training(format!(
            "all {} training examples are {which}; the detector needs both actionable and false warnings",
            data.len()
        )));
    }
    let p = ModelParams::init_detector(first.dim(), hidden_dim, cfg.seed)?;
    let rows = sparse_rows(&p, data.iter().map(|(e, _)| e))?;
    let targets = detector_targets(data);
    let cw = class_weights(&targets, 2, cfg.class_weighting);
    Ok(descend(p, Head::Detector, &rows, &targets, &cw, cfg))
}

/// Continues training a Full-stage model on four-class weak labels.
pub fn train_reranker<T: Scalar>(
    data: &[(EmbeddingVector<T>, WeakLabelClass)],
    params: &ModelParams<T>,
    cfg: &TrainingConfig,
) -> Result<Trained<T>> {
    cfg.validate()?;
    require_full(params)?;
    if data.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let rows = sparse_rows(params, data.iter().map(|(e, _)| e))?;
    let targets = reranker_targets(data);
    if cfg.class_weighting == ClassWeighting::InverseFrequency {
        for c in WeakLabelClass::ORDER {
            if !targets.contains(&c.index()) {
                log::warn!("class {c} is absent from the reranker training set; its loss weight is 0");
            }
        }
    }
    let cw = class_weights(&targets, NUM_CLASSES, cfg.class_weighting);
    Ok(descend(params.clone(), Head::Reranker, &rows, &targets, &cw, cfg))
}
