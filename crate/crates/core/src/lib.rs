//! Identifying actionable static-analysis warnings.
//!
//! Warnings are mined from a project's history (a warning that disappears
//! was acted upon), weakly labeled from their fix commits, hashed into
//! vectors and ranked by a two-stage model so that the warnings most likely
//! to be real bugs come first.

pub mod clex;
pub mod config;
pub mod corpus;
pub mod digest;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod labeler;
pub mod miner;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod synth;

pub use config::{AcwConfig, BugTypeMap};
pub use corpus::LabeledRecord;
pub use encoder::{EmbeddingVector, Encoder, HashingEncoder, TokenChannels};
pub use error::{Error, Result};
pub use model::{aggregate_label, Warning, WarningType, WeakLabel, WeakLabelClass};
pub use nn::{ModelFile, ModelParams, Prediction, RankedWarning, Stage, TrainingConfig};
pub use scalar::Scalar;

pub type Embedding = EmbeddingVector<f64>;
pub type Model = ModelParams<f64>;
pub type Pred = Prediction<f64>;
pub type Ranked = RankedWarning<f64>;
pub type ModelDoc = ModelFile<f64>;
