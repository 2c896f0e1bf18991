//! Two-stage model: a binary actionable-warning detector, then a four-class
//! reranker warm-started from the detector's body.

pub mod file;
pub mod params;
pub mod rank;
pub mod train;

pub use file::{ModelFile, TrainingMetadata, FORMAT_VERSION};
pub use params::{sigmoid, softmax, warm_start_reranker, ModelParams, Stage, Weights, DEFAULT_HIDDEN_DIM, NUM_CLASSES};
pub use rank::{rank, rank_order, rank_score, Band, Prediction, RankedWarning};
pub use train::{
    detector_objective, reranker_objective, train_detector, train_reranker, ClassWeighting, LossGrad, Trained,
    TrainingConfig,
};
