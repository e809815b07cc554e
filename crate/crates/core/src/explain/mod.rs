//! Statistical and visual explanations mined from trained maps.
//!
//! Every explanation is a plain data payload wrapped in an [`ArtifactDoc`]
//! (`{kind, version, map_id, payload}`) for JSON output, and can be drawn
//! as a standalone SVG with [`svg::render_svg`].

pub mod svg;
pub mod treemap;
pub mod umatrix;

pub use treemap::{treemap_layout, CellClass, Rect, TreemapLayout};
pub use umatrix::{starburst, u_matrix, Cell, Starburst, UMatrix};

use crate::ghsom::GhsomTree;
use crate::label::Label;
use crate::map::{MapError, MapId, MapModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use umatrix::cells;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("unknown artifact kind {0:?}")]
    UnknownArtifactKind(String),
    #[error("malformed {kind} artifact: {reason}")]
    MalformedArtifact { kind: String, reason: String },
    #[error("unsupported artifact version {0}")]
    UnsupportedVersion(u32),
    #[error("feature {index} out of range for dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("{scores} scores for {names} feature names")]
    NameCountMismatch { scores: usize, names: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Local feature significance: `S = 1 - (X - X_min) / (X_max - X_min)`.
///
/// All ones when every distance is equal.
pub fn local_significance(distances: &[f64]) -> Vec<f64> {
    let lo = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![1.0; distances.len()];
    }
    distances.iter().map(|x| (1.0 - (x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    /// Map holding the terminal BMU.
    pub map_id: MapId,
    pub bmu: usize,
    pub label: Label,
    /// Per-feature `|x_f - w_f|` against the BMU.
    pub distances: Vec<f64>,
    pub significance: Vec<f64>,
    /// `(map, neuron)` descent for hierarchies; a single step for flat maps.
    pub path: Vec<(MapId, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
}

impl LocalExplanation {
    fn build(map: &MapModel, bmu: usize, label: Label, sample: &[f64], path: Vec<(MapId, usize)>) -> Self {
        let distances: Vec<f64> = sample.iter().zip(&map.neuron(bmu).weights).map(|(x, w)| (x - w).abs()).collect();
        let significance = local_significance(&distances);
        LocalExplanation { map_id: map.map_id(), bmu, label, distances, significance, path, feature_names: Vec::new() }
    }
}

pub fn local_explanation(map: &MapModel, sample: &[f64]) -> Result<LocalExplanation, ExplainError> {
    let (bmu, _) = map.bmu(sample)?;
    let label = map.predict_flat(sample)?;
    Ok(LocalExplanation::build(map, bmu, label, sample, vec![(map.map_id(), bmu)]))
}

/// Explanation against the terminal neuron of the hierarchical descent.
pub fn local_explanation_tree(tree: &GhsomTree, sample: &[f64]) -> Result<LocalExplanation, ExplainError> {
    let pred = tree.predict(sample)?;
    let &(m, bmu) = pred.path.last().expect("descent visits the root");
    let map = tree.map(m).expect("path maps exist");
    Ok(LocalExplanation::build(map, bmu, pred.label, sample, pred.path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub score: f64,
}

/// Features ranked by global significance, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalExplanation {
    pub ranking: Vec<FeatureScore>,
}

impl GlobalExplanation {
    pub fn top(&self, k: usize) -> impl Iterator<Item = &str> {
        self.ranking.iter().take(k).map(|f| f.name.as_str())
    }
}

/// Stable descending sort: equal scores keep their input order.
pub fn global_explanation(significance: &[f64], names: &[String]) -> Result<GlobalExplanation, ExplainError> {
    if significance.len() != names.len() {
        return Err(ExplainError::NameCountMismatch { scores: significance.len(), names: names.len() });
    }
    let mut ranking: Vec<FeatureScore> =
        names.iter().zip(significance).map(|(n, &s)| FeatureScore { name: n.clone(), score: s }).collect();
    ranking.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(GlobalExplanation { ranking })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeatmap {
    pub map_id: MapId,
    pub feature: usize,
    pub feature_name: String,
    pub cells: Vec<Cell<f64>>,
}

/// Weight component `feature` of every neuron.
pub fn feature_heatmap(map: &MapModel, feature: usize, name: &str) -> Result<FeatureHeatmap, ExplainError> {
    if feature >= map.dim() {
        return Err(ExplainError::FeatureOutOfRange { index: feature, dim: map.dim() });
    }
    Ok(FeatureHeatmap {
        map_id: map.map_id(),
        feature,
        feature_name: name.to_string(),
        cells: cells(map, |id| map.neuron(id).weights[feature]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCell {
    pub label: Option<Label>,
    #[serde(default)]
    pub branch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub map_id: MapId,
    pub cells: Vec<Cell<LabelCell>>,
}

/// Assigned neuron labels; branch neurons are flagged.
pub fn label_map(map: &MapModel) -> LabelMap {
    LabelMap {
        map_id: map.map_id(),
        cells: cells(map, |id| {
            let n = map.neuron(id);
            LabelCell { label: n.label, branch: n.child_map_id.is_some() }
        }),
    }
}

/// U-matrix together with its starburst overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UMatrixArtifact {
    pub umatrix: UMatrix,
    pub starburst: Starburst,
}

pub fn u_matrix_artifact(map: &MapModel) -> UMatrixArtifact {
    let umatrix = u_matrix(map);
    let starburst = starburst(map, &umatrix);
    UMatrixArtifact { umatrix, starburst }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Artifact {
    UMatrix(UMatrixArtifact),
    FeatureHeatmap(FeatureHeatmap),
    LabelMap(LabelMap),
    LocalExplanation(LocalExplanation),
    GlobalSignificance(GlobalExplanation),
    Treemap(TreemapLayout),
}

const KINDS: [&str; 6] =
    ["u_matrix", "feature_heatmap", "label_map", "local_explanation", "global_significance", "treemap"];

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::UMatrix(_) => KINDS[0],
            Artifact::FeatureHeatmap(_) => KINDS[1],
            Artifact::LabelMap(_) => KINDS[2],
            Artifact::LocalExplanation(_) => KINDS[3],
            Artifact::GlobalSignificance(_) => KINDS[4],
            Artifact::Treemap(_) => KINDS[5],
        }
    }

    pub fn map_id(&self) -> Option<MapId> {
        match self {
            Artifact::UMatrix(a) => Some(a.umatrix.map_id),
            Artifact::FeatureHeatmap(a) => Some(a.map_id),
            Artifact::LabelMap(a) => Some(a.map_id),
            Artifact::LocalExplanation(a) => Some(a.map_id),
            Artifact::GlobalSignificance(_) => None,
            Artifact::Treemap(a) => a.maps.first().map(|m| m.map_id),
        }
    }

    pub fn to_doc(&self) -> ArtifactDoc {
        let Value::Object(mut tagged) = serde_json::to_value(self).expect("artifacts serialize") else {
            unreachable!("adjacently tagged enums serialize to objects")
        };
        ArtifactDoc {
            kind: self.kind().to_string(),
            version: ARTIFACT_VERSION,
            map_id: self.map_id(),
            payload: tagged.remove("payload").unwrap_or(Value::Null),
        }
    }

    pub fn from_doc(doc: &ArtifactDoc) -> Result<Artifact, ExplainError> {
        if !KINDS.contains(&doc.kind.as_str()) {
            return Err(ExplainError::UnknownArtifactKind(doc.kind.clone()));
        }
        if doc.version != ARTIFACT_VERSION {
            return Err(ExplainError::UnsupportedVersion(doc.version));
        }
        let tagged = serde_json::json!({ "kind": doc.kind, "payload": doc.payload });
        serde_json::from_value(tagged)
            .map_err(|e| ExplainError::MalformedArtifact { kind: doc.kind.clone(), reason: e.to_string() })
    }
}

/// Serialized envelope of an explanation artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactDoc {
    pub kind: String,
    pub version: u32,
    pub map_id: Option<MapId>,
    pub payload: Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;
    use crate::label::LabelVector;
    use crate::map::{Coord, Neuron};

    #[test]
    fn significance_examples() {
        let s = local_significance(&[0.2, 0.8, 0.5]);
        let want = [1.0, 0.0, 0.5];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(local_significance(&[0.3, 0.3, 0.3]), vec![1.0; 3]);
        assert_eq!(local_significance(&[0.4, 0.0, 0.9])[1], 1.0);
    }

    #[test]
    fn global_ranking_is_stable() {
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let g = global_explanation(&[0.25, 1.0, 0.25, 0.5], &names).unwrap();
        assert_eq!(g.top(4).collect::<Vec<_>>(), vec!["b", "d", "a", "c"]);
        assert!(global_explanation(&[1.0], &names).is_err());
    }

    fn labelled_map() -> MapModel {
        let mut m = MapModel::grid(MapId(0), 2, 2, 2, 0, |i| vec![i as f64 / 3.0, 1.0 - i as f64 / 3.0]).unwrap();
        let d = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.3, 0.7], vec![0.7, 0.3]]).unwrap();
        let l = LabelVector(vec![Label::Benign, Label::Malicious, Label::Benign, Label::Malicious]);
        m.assign_labels(&d, &l).unwrap();
        m
    }

    #[test]
    fn heatmap_and_label_map_project_the_map() {
        let m = labelled_map();
        let h = feature_heatmap(&m, 1, "f1").unwrap();
        let col: Vec<f64> = m.neurons().iter().map(|n| n.weights[1]).collect();
        assert_eq!(h.cells.iter().map(|c| c.value).collect::<Vec<_>>(), col);
        assert!(feature_heatmap(&m, 2, "x").is_err());
        let lm = label_map(&m);
        for (c, n) in lm.cells.iter().zip(m.neurons()) {
            assert_eq!(c.value.label, n.label);
            assert_eq!(c.coord, n.coord);
        }
    }

    #[test]
    fn local_explanation_uses_bmu() {
        let m = labelled_map();
        let e = local_explanation(&m, &[0.0, 0.9]).unwrap();
        assert_eq!(e.bmu, 0);
        assert_eq!(e.label, Label::Benign);
        assert!((e.distances[1] - 0.1).abs() < 1e-12);
        assert_eq!(e.significance, vec![1.0, 0.0]);
        assert!(local_explanation(&m, &[0.0]).is_err());
        let t = GhsomTree::from_map(m.clone());
        assert_eq!(local_explanation_tree(&t, &[0.0, 0.9]).unwrap(), e);
    }

    #[test]
    fn artifact_envelope_round_trip() {
        let m = labelled_map();
        let a = Artifact::UMatrix(u_matrix_artifact(&m));
        let doc = a.to_doc();
        assert_eq!(doc.kind, "u_matrix");
        assert_eq!(doc.map_id, Some(MapId(0)));
        let text = serde_json::to_string(&doc).unwrap();
        let back: ArtifactDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(Artifact::from_doc(&back).unwrap(), a);

        let bad = ArtifactDoc { kind: "pie_chart".into(), ..doc.clone() };
        assert!(matches!(Artifact::from_doc(&bad), Err(ExplainError::UnknownArtifactKind(_))));
        let broken = ArtifactDoc { payload: serde_json::json!({"cells": 3}), ..doc };
        assert!(matches!(Artifact::from_doc(&broken), Err(ExplainError::MalformedArtifact { .. })));
    }

    #[test]
    fn single_neuron_map_explains() {
        let mut n = Neuron::new(0, Coord::new(0, 0), vec![0.5]);
        n.label = Some(Label::Malicious);
        let m = MapModel::from_neurons(MapId(0), 1, 0, vec![n]).unwrap();
        assert_eq!(local_explanation(&m, &[0.2]).unwrap().significance, vec![1.0]);
    }
}
