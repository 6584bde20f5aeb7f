//! Per-target logistic regression, metrics, dataset preparation and label
//! statistics.

pub mod dataset;
pub mod logistic;
pub mod metrics;
pub mod stats;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::features::DctConfig;

pub use dataset::{
    join_labels, label_map, quantize_labels, scene_label_map, split_units, target_labels, EvalMode, LabeledDataset,
    SplitSpec, SplitUnit,
};
pub use logistic::{
    argmax, predict, train_logistic, train_multiclass, Hyper, LinearModel, OneVsRest, Prediction, TrainReport,
};
pub use metrics::{evaluate, evaluate_binary, ClassMetrics, MetricsReport, MetricsRow};
pub use stats::{conditional_distribution, lead_time_ci, ConditionalDistribution, MeanCi};

/// The fitted parameters: one binary model, or one per scene class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    Binary(LinearModel),
    Scene(OneVsRest),
}

/// How a model's training rows were built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSetup {
    /// `is_match`, `is_active`, `is_standing` or `scene`.
    pub target: String,
    pub feature: DctConfig,
    pub lag: usize,
    /// Clip length used to cut videos; lag windows never cross clips.
    #[serde(default)]
    pub clip_s: Option<u32>,
    #[serde(default)]
    pub mode: EvalMode,
    pub hyper: Hyper,
}

impl TrainSetup {
    /// Hex SHA-256 of the setup's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("setup serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Everything needed to rebuild features and score new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    #[serde(flatten)]
    pub setup: TrainSetup,
    pub config_hash: String,
    pub model: ModelBody,
}

impl SavedModel {
    pub fn new(setup: TrainSetup, model: ModelBody) -> Self {
        SavedModel {
            config_hash: setup.hash(),
            setup,
            model,
        }
    }

    /// Hard labels as class indices (0/1 for binary targets).
    pub fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        match &self.model {
            ModelBody::Binary(m) => Ok(predict(m, rows)?.iter().map(|p| p.label as usize).collect()),
            ModelBody::Scene(m) => rows.iter().map(|r| m.predict(r)).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
