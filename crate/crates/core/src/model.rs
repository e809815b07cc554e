//! Trained model bundle: the classifier plus everything needed to turn raw
//! rows into its input space.

use crate::data::{DataError, FeatureMatrix, Preprocessor, RawDataset, Schema};
use crate::eval::Classifier;
use crate::ghsom::GhsomTree;
use crate::label::Label;
use crate::map::{MapError, MapModel};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("reading or writing model: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("selected feature {0:?} is not produced by the preprocessor")]
    UnknownFeature(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Som,
    Gsom,
    Ghsom,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Som => "som",
            ModelKind::Gsom => "gsom",
            ModelKind::Ghsom => "ghsom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Model {
    Som(MapModel),
    Gsom(MapModel),
    Ghsom(GhsomTree),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Som(_) => ModelKind::Som,
            Model::Gsom(_) => ModelKind::Gsom,
            Model::Ghsom(_) => ModelKind::Ghsom,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Som(m) | Model::Gsom(m) => m.dim(),
            Model::Ghsom(t) => t.dim(),
        }
    }

    /// Maps in depth-first order; a single map for flat models.
    pub fn maps(&self) -> Vec<&MapModel> {
        match self {
            Model::Som(m) | Model::Gsom(m) => vec![m],
            Model::Ghsom(t) => t.subtree_ids(t.root_id()).into_iter().map(|id| t.map(id).expect("linked map")).collect(),
        }
    }
}

impl Classifier for Model {
    fn classify(&self, sample: &[f64]) -> Result<Label, MapError> {
        match self {
            Model::Som(m) | Model::Gsom(m) => m.classify(sample),
            Model::Ghsom(t) => t.classify(sample),
        }
    }

    fn network_size(&self) -> usize {
        match self {
            Model::Som(_) | Model::Gsom(_) => 1,
            Model::Ghsom(t) => t.network_size(),
        }
    }
}

/// A model together with its input pipeline and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    // Not flattened: flattening buffers the tree and loses its integer map keys.
    pub model: Model,
    /// Encoder fitted on the training rows; `None` for models trained on
    /// already-normalized matrices.
    pub preprocessor: Option<Preprocessor>,
    /// Layout of raw input files, for loading new data against the model.
    #[serde(default)]
    pub schema: Option<Schema>,
    /// Model input columns, by name, in order.
    pub features: Vec<String>,
    /// Global significance of every preprocessed feature, aligned with the
    /// preprocessor's feature names (or `features` without one).
    pub significance: Vec<f64>,
    pub train_time_s: f64,
    pub seed: u64,
    /// Trainer parameters as given.
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned_with_delta: Option<f64>,
}

impl ModelFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let f: ModelFile = serde_json::from_str(&text)?;
        if f.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(f.version));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Names of every preprocessed feature, before selection.
    pub fn all_feature_names(&self) -> &[String] {
        match &self.preprocessor {
            Some(p) => p.feature_names(),
            None => &self.features,
        }
    }

    /// Encodes raw rows and keeps the model's input columns.
    pub fn prepare(&self, raw: &RawDataset) -> Result<FeatureMatrix, ModelError> {
        let Some(p) = &self.preprocessor else {
            return Err(ModelError::Data(DataError::InvalidMatrix("model has no preprocessor for raw rows".into())));
        };
        let full = p.transform_features(raw)?;
        self.select(&full)
    }

    /// Picks the model's input columns from an encoded matrix by name.
    pub fn select(&self, full: &FeatureMatrix) -> Result<FeatureMatrix, ModelError> {
        let cols = self
            .features
            .iter()
            .map(|n| {
                full.feature_names().iter().position(|f| f == n).ok_or_else(|| ModelError::UnknownFeature(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(full.select_columns(&cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapId;

    #[test]
    fn round_trips_through_disk() {
        let mut m = MapModel::grid(MapId(0), 2, 2, 2, 5, |i| vec![i as f64 / 4.0, 0.5]).unwrap();
        let d = FeatureMatrix::from_rows(&[vec![0.0, 0.5], vec![0.75, 0.5]]).unwrap();
        m.assign_labels(&d, &crate::LabelVector(vec![Label::Benign, Label::Malicious])).unwrap();
        let f = ModelFile {
            version: MODEL_FORMAT_VERSION,
            model: Model::Gsom(m),
            preprocessor: None,
            schema: None,
            features: vec!["f0".into(), "f1".into()],
            significance: vec![1.0, 0.0],
            train_time_s: 0.5,
            seed: 5,
            params: serde_json::json!({"spread_factor": 0.9}),
            pruned_with_delta: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        f.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.model.kind(), ModelKind::Gsom);
        assert_eq!(back.model.classify(&[0.7, 0.5]).unwrap(), Label::Malicious);
        let picked = back.select(&d).unwrap();
        assert_eq!(picked, d);
    }

    #[test]
    fn ghsom_round_trips_through_disk() {
        let (d, l) = crate::synth::two_blobs(120, 0.05, 8.0, 3);
        let tree = crate::ghsom::train_ghsom(&d, &l, &Default::default()).unwrap().tree;
        assert!(tree.network_size() > 1);
        let f = ModelFile {
            version: MODEL_FORMAT_VERSION,
            model: Model::Ghsom(tree),
            preprocessor: None,
            schema: None,
            features: d.feature_names().to_vec(),
            significance: vec![1.0; d.dim()],
            train_time_s: 0.1,
            seed: 0,
            params: serde_json::json!({}),
            pruned_with_delta: Some(0.3),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        f.save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), f);
    }
}
