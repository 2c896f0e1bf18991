use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingVector;
use crate::error::{Error, Result};
use crate::model::WeakLabelClass;
use crate::scalar::Scalar;

pub const NUM_CLASSES: usize = 4;
pub const DEFAULT_HIDDEN_DIM: usize = 64;

/// Mixed into the model seed for the reranker head initialization.
const RERANKER_SEED_SALT: u64 = 0x7265_7261_6e6b_6572;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    DetectorOnly,
    Full,
}

/// Row-major weight arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights<T> {
    /// `hidden_dim x embed_dim`
    pub body_w: Vec<T>,
    pub body_b: Vec<T>,
    pub detector_w: Vec<T>,
    pub detector_b: T,
    /// `4 x hidden_dim`, rows in class order.
    pub reranker_w: Option<Vec<T>>,
    pub reranker_b: Option<Vec<T>>,
}

/// Shared tanh body with a one-output detector head and a four-output
/// reranker head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub stage: Stage,
    pub weights: Weights<T>,
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
}

/// A sparse input row: `(index, value)` of the non-zero entries.
pub type SparseRow<T> = Vec<(usize, T)>;

impl<T: Scalar> ModelParams<T> {
    /// Uniform body weights in [-√3, √3], Glorot-uniform detector head, zero
    /// biases, no reranker head.
    ///
    /// Inputs are unit-norm, so each hidden pre-activation then has unit
    /// variance whatever the embedding width; a fan-in scaled init would
    /// leave tanh in its linear range at D = 1024.
    pub fn init_detector(embed_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if embed_dim == 0 || hidden_dim == 0 {
            return Err(Error::Contract("model dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body_bound = 3f64.sqrt();
        let head_bound = (6.0 / (hidden_dim + 1) as f64).sqrt();
        Ok(ModelParams {
            embed_dim,
            hidden_dim,
            seed,
            stage: Stage::DetectorOnly,
            weights: Weights {
                body_w: uniform(&mut rng, hidden_dim * embed_dim, body_bound),
                body_b: vec![T::zero(); hidden_dim],
                detector_w: uniform(&mut rng, hidden_dim, head_bound),
                detector_b: T::zero(),
                reranker_w: None,
                reranker_b: None,
            },
        })
    }

    /// A full model with every weight freshly initialized (no warm start).
    pub fn init_full(embed_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        Ok(warm_start_reranker(&Self::init_detector(embed_dim, hidden_dim, seed)?))
    }

    pub fn check_input(&self, e: &EmbeddingVector<T>) -> Result<()> {
        if e.dim() != self.embed_dim {
            return Err(Error::Contract(format!(
                "embedding has dimension {}, model expects {}",
                e.dim(),
                self.embed_dim
            )));
        }
        Ok(())
    }

    pub(crate) fn hidden_sparse(&self, x: &[(usize, T)]) -> Vec<T> {
        let d = self.embed_dim;
        let w = &self.weights;
        (0..self.hidden_dim)
            .map(|h| {
                let row = &w.body_w[h * d..(h + 1) * d];
                let z = x.iter().fold(w.body_b[h], |acc, &(i, v)| acc + row[i] * v);
                z.tanh()
            })
            .collect()
    }

    pub(crate) fn detector_logit(&self, hidden: &[T]) -> T {
        let w = &self.weights;
        hidden
            .iter()
            .zip(&w.detector_w)
            .fold(w.detector_b, |acc, (h, wd)| acc + *h * *wd)
    }

    pub(crate) fn reranker_logits(&self, hidden: &[T]) -> Result<[T; NUM_CLASSES]> {
        let (Some(rw), Some(rb)) = (&self.weights.reranker_w, &self.weights.reranker_b) else {
            return Err(Error::Contract("model has no reranker head (stage DetectorOnly)".into()));
        };
        let hd = self.hidden_dim;
        let mut out = [T::zero(); NUM_CLASSES];
        for (c, o) in out.iter_mut().enumerate() {
            *o = rw[c * hd..(c + 1) * hd]
                .iter()
                .zip(hidden)
                .fold(rb[c], |acc, (w, h)| acc + *w * *h);
        }
        Ok(out)
    }

    /// Probability that the warning is actionable.
    pub fn detector_forward(&self, e: &EmbeddingVector<T>) -> Result<T> {
        self.check_input(e)?;
        Ok(sigmoid(self.detector_logit(&self.hidden_sparse(&e.nonzeros()))))
    }

    /// Class probabilities in class order (FalseWarning, UTB, LTB, VTB).
    pub fn reranker_forward(&self, e: &EmbeddingVector<T>) -> Result<[T; NUM_CLASSES]> {
        self.check_input(e)?;
        Ok(softmax(self.reranker_logits(&self.hidden_sparse(&e.nonzeros()))?))
    }

    pub fn all_finite(&self) -> bool {
        let w = &self.weights;
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        finite(&w.body_w)
            && finite(&w.body_b)
            && finite(&w.detector_w)
            && w.detector_b.is_finite()
            && w.reranker_w.as_deref().is_none_or(finite)
            && w.reranker_b.as_deref().is_none_or(finite)
    }

    /// Checks array shapes, finiteness and stage consistency.
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let (d, h) = (self.embed_dim, self.hidden_dim);
        let bad = |what: &str| Err(Error::Model(format!("{what} has the wrong shape")));
        if w.body_w.len() != h * d {
            return bad("body_w");
        }
        if w.body_b.len() != h {
            return bad("body_b");
        }
        if w.detector_w.len() != h {
            return bad("detector_w");
        }
        match (&w.reranker_w, &w.reranker_b, self.stage) {
            (Some(rw), Some(rb), Stage::Full) => {
                if rw.len() != NUM_CLASSES * h || rb.len() != NUM_CLASSES {
                    return bad("reranker head");
                }
            }
            (None, None, Stage::DetectorOnly) => {}
            _ => return Err(Error::Model("reranker head presence does not match stage".into())),
        }
        if !self.all_finite() {
            return Err(Error::Model("non-finite weight".into()));
        }
        Ok(())
    }
}

/// Copies the body and detector head and adds a small seeded reranker head.
pub fn warm_start_reranker<T: Scalar>(detector: &ModelParams<T>) -> ModelParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(detector.seed ^ RERANKER_SEED_SALT);
    let mut p = detector.clone();
    p.weights.reranker_w = Some(uniform(&mut rng, NUM_CLASSES * p.hidden_dim, 0.01));
    p.weights.reranker_b = Some(uniform(&mut rng, NUM_CLASSES, 0.01));
    p.stage = Stage::Full;
    p
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn softmax<T: Scalar>(logits: [T; NUM_CLASSES]) -> [T; NUM_CLASSES] {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out = logits.map(|l| (l - m).exp());
    let s: T = out.iter().copied().sum();
    for o in &mut out {
        *o = *o / s;
    }
    out
}

pub fn class_of(index: usize) -> WeakLabelClass {
    WeakLabelClass::from_index(index).expect("class index < 4")
}
