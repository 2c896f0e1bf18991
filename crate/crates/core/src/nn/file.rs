//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::model::WeakLabelClass;
use crate::nn::params::{ModelParams, Stage, Weights};
use crate::nn::train::TrainingConfig;
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub detector_config: Option<TrainingConfig>,
    pub reranker_config: Option<TrainingConfig>,
    pub detector_loss: Vec<f64>,
    pub reranker_loss: Vec<f64>,
    pub corpus_digest: String,
    pub split_mode: String,
    pub test_fraction: f64,
    pub split: Option<Split>,
    pub decision_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile<T> {
    pub format_version: u32,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub class_order: Vec<String>,
    pub seed: u64,
    pub stage: Stage,
    pub weights: Weights<T>,
    pub training_metadata: TrainingMetadata,
}

fn class_order() -> Vec<String> {
    WeakLabelClass::ORDER.iter().map(|c| c.as_str().to_string()).collect()
}

impl<T: Scalar> ModelFile<T> {
    pub fn new(params: ModelParams<T>, training_metadata: TrainingMetadata) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            embed_dim: params.embed_dim,
            hidden_dim: params.hidden_dim,
            class_order: class_order(),
            seed: params.seed,
            stage: params.stage,
            weights: params.weights,
            training_metadata,
        }
    }

    pub fn params(&self) -> ModelParams<T> {
        ModelParams {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            seed: self.seed,
            stage: self.stage,
            weights: self.weights.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.class_order != class_order() {
            return Err(Error::Model(format!("unexpected class_order {:?}", file.class_order)));
        }
        file.params().validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let p = ModelParams::<f64>::init_full(16, 4, 3).unwrap();
        let f = ModelFile::new(p.clone(), TrainingMetadata::default());
        let json = f.to_json();
        let back = ModelFile::<f64>::from_json(&json).unwrap();
        assert_eq!(back.params(), p);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn rejects_tampered_files() {
        let p = ModelParams::<f64>::init_detector(8, 2, 3).unwrap();
        let json = ModelFile::new(p, TrainingMetadata::default()).to_json();
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["class_order"][0] = "VTB".into();
        assert!(ModelFile::<f64>::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["embed_dim"] = 9.into();
        assert!(ModelFile::<f64>::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["stage"] = "Full".into();
        assert!(ModelFile::<f64>::from_json(&v.to_string()).is_err());

        assert!(ModelFile::<f64>::from_json("{").is_err());
    }
}
