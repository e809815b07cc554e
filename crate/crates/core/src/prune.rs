//! Pessimistic bottom-up pruning of a map hierarchy.
//!
//! One post-order pass over the maps. At every non-root map `v` the
//! training samples routed into `v` give two error rates:
//!
//! * `e_st`: hierarchical prediction starting at `v` (through whatever
//!   remains of its subtree);
//! * `e_bl`: a single leaf predicting the majority label of those samples.
//!
//! The subtree is removed when `e_st + α ≥ e_bl`, with
//!
//! ```text
//! α = sqrt( ((l + s)·ln n + ln(m / δ)) / m_local )
//! ```
//!
//! where `l` is the map depth, `s` the current size of its subtree in maps,
//! `n` the map count of the unpruned tree, `m` the training-set size and
//! `m_local` the number of samples reaching `v`.

use crate::data::FeatureMatrix;
use crate::ghsom::GhsomTree;
use crate::label::{Label, LabelVector};
use crate::map::{MapError, MapId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DELTA: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("delta {0} must lie strictly between 0 and 1")]
    InvalidDelta(f64),
    #[error("complexity penalty needs at least one local sample")]
    ZeroLocalSamples,
    #[error("counts must be positive: {0}")]
    InvalidCount(&'static str),
    #[error("{labels} labels for {samples} samples")]
    LengthMismatch { samples: usize, labels: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    pub delta: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams { delta: DEFAULT_DELTA }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<(), PruneError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PruneError::InvalidDelta(self.delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneDecision {
    Remove,
    Keep,
}

/// One evaluated map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub map_id: MapId,
    pub depth: usize,
    pub subtree_size: usize,
    pub local_samples: usize,
    pub e_st: f64,
    pub e_bl: f64,
    /// `None` when no sample reaches the map; such maps are removed.
    pub alpha: Option<f64>,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub delta: f64,
    pub maps_before: usize,
    pub maps_after: usize,
    pub removed_map_ids: Vec<MapId>,
    pub decisions: Vec<DecisionRecord>,
}

impl PruneReport {
    /// Share of maps removed, in percent.
    pub fn reduction_percent(&self) -> f64 {
        if self.maps_before == 0 {
            return 0.0;
        }
        100.0 * (self.maps_before - self.maps_after) as f64 / self.maps_before as f64
    }
}

/// Tree complexity penalty α (natural logarithms).
pub fn complexity_penalty(
    depth: usize,
    subtree_size: usize,
    total_maps: usize,
    total_samples: usize,
    delta: f64,
    local_samples: usize,
) -> Result<f64, PruneError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PruneError::InvalidDelta(delta));
    }
    if local_samples == 0 {
        return Err(PruneError::ZeroLocalSamples);
    }
    if depth == 0 || subtree_size == 0 || total_maps == 0 || total_samples == 0 {
        return Err(PruneError::InvalidCount("depth, subtree size, map count and sample count"));
    }
    let numerator = (depth + subtree_size) as f64 * (total_maps as f64).ln() + (total_samples as f64 / delta).ln();
    Ok((numerator.max(0.0) / local_samples as f64).sqrt())
}

/// `Remove` iff `e_st + α ≥ e_bl`.
pub fn prune_decision(e_st: f64, alpha: f64, e_bl: f64) -> PruneDecision {
    if e_st + alpha >= e_bl {
        PruneDecision::Remove
    } else {
        PruneDecision::Keep
    }
}

/// Error of the majority-label constant classifier over `labels`.
fn best_leaf_error(labels: &[Label]) -> f64 {
    let malicious = labels.iter().filter(|l| **l == Label::Malicious).count();
    let benign = labels.len() - malicious;
    let wrong = match Label::majority(benign, malicious) {
        Label::Malicious => benign,
        Label::Benign => malicious,
    };
    wrong as f64 / labels.len() as f64
}

pub fn prune_tree(
    tree: &GhsomTree,
    data: &FeatureMatrix,
    labels: &LabelVector,
    p: &PruneParams,
) -> Result<(GhsomTree, PruneReport), PruneError> {
    p.validate()?;
    if labels.len() != data.n_samples() {
        return Err(PruneError::LengthMismatch { samples: data.n_samples(), labels: labels.len() });
    }
    if data.dim() != tree.dim() {
        return Err(MapError::DimensionMismatch { expected: tree.dim(), got: data.dim() }.into());
    }
    let maps_before = tree.network_size();
    let total_samples = data.n_samples().max(1);
    // Routing into a map only depends on its ancestors, which a post-order
    // pass never touches before visiting the map, so one routing suffices.
    let local = tree.route(data)?;
    let mut pruned = tree.clone();
    let mut decisions = Vec::new();
    let mut removed_map_ids = Vec::new();

    for id in tree.post_order() {
        if id == tree.root_id() {
            continue;
        }
        let samples = &local[&id];
        let depth = tree.depth(id);
        let subtree_size = pruned.subtree_ids(id).len();
        if samples.is_empty() {
            decisions.push(DecisionRecord {
                map_id: id,
                depth,
                subtree_size,
                local_samples: 0,
                e_st: 0.0,
                e_bl: 0.0,
                alpha: None,
                removed: true,
            });
            removed_map_ids.extend(pruned.remove_subtree(id));
            continue;
        }
        let local_labels: Vec<Label> = samples.iter().map(|&i| labels[i]).collect();
        let mut wrong = 0usize;
        for (&i, &truth) in samples.iter().zip(&local_labels) {
            if pruned.predict_from(id, data.row(i))?.label != truth {
                wrong += 1;
            }
        }
        let e_st = wrong as f64 / samples.len() as f64;
        let e_bl = best_leaf_error(&local_labels);
        let alpha = complexity_penalty(depth, subtree_size, maps_before, total_samples, p.delta, samples.len())?;
        let removed = prune_decision(e_st, alpha, e_bl) == PruneDecision::Remove;
        decisions.push(DecisionRecord {
            map_id: id,
            depth,
            subtree_size,
            local_samples: samples.len(),
            e_st,
            e_bl,
            alpha: Some(alpha),
            removed,
        });
        if removed {
            removed_map_ids.extend(pruned.remove_subtree(id));
        }
    }
    removed_map_ids.sort_unstable();
    let report = PruneReport {
        delta: p.delta,
        maps_before,
        maps_after: pruned.network_size(),
        removed_map_ids,
        decisions,
    };
    Ok((pruned, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{Coord, MapModel, Neuron};
    use std::collections::BTreeMap;

    #[test]
    fn penalty_hand_value() {
        let a = complexity_penalty(2, 5, 100, 1000, 0.3, 50).unwrap();
        assert!((a - 0.8983086260882137).abs() < 1e-12);
    }

    #[test]
    fn penalty_limits_and_monotonicity() {
        let a = complexity_penalty(1, 1, 1, 1, 1.0 - 1e-12, 1).unwrap();
        assert!(a < 2e-6);
        let loose = complexity_penalty(2, 5, 100, 1000, 0.3, 50).unwrap();
        let tight = complexity_penalty(2, 5, 100, 1000, 0.03, 50).unwrap();
        assert!(tight > loose);
        assert_eq!(complexity_penalty(2, 5, 100, 1000, 0.3, 0), Err(PruneError::ZeroLocalSamples));
        assert!(complexity_penalty(2, 5, 100, 1000, 1.0, 5).is_err());
    }

    #[test]
    fn decision_rule() {
        assert_eq!(prune_decision(0.10, 0.05, 0.12), PruneDecision::Remove);
        assert_eq!(prune_decision(0.01, 0.0, 0.10), PruneDecision::Keep);
        assert_eq!(prune_decision(0.1, 0.0, 0.1), PruneDecision::Remove);
    }

    #[test]
    fn best_leaf_majority() {
        use Label::*;
        assert_eq!(best_leaf_error(&[Benign, Benign, Malicious]), 1.0 / 3.0);
        assert_eq!(best_leaf_error(&[Benign, Malicious]), 0.5);
    }

    fn map(id: u32, weights: &[f64], labels: &[Label]) -> MapModel {
        let neurons = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let mut n = Neuron::new(i, Coord::new(0, i as i32), vec![w]);
                n.label = Some(labels[i]);
                n
            })
            .collect();
        MapModel::from_neurons(MapId(id), 1, 0, neurons).unwrap()
    }

    /// Root with one child under neuron 1; the child separates classes the
    /// root neuron cannot.
    fn useful_child_tree() -> GhsomTree {
        use Label::*;
        let mut root = map(0, &[0.1, 0.7], &[Benign, Benign]);
        root.neuron_mut(1).child_map_id = Some(MapId(1));
        let child = map(1, &[0.6, 0.9], &[Benign, Malicious]);
        GhsomTree::from_parts(
            MapId(0),
            BTreeMap::from([(MapId(0), root), (MapId(1), child)]),
            BTreeMap::from([(MapId(1), (MapId(0), 1))]),
        )
        .unwrap()
    }

    #[test]
    fn keeps_a_child_that_earns_its_penalty() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..500 {
            let off = (i % 10) as f64 * 0.001;
            rows.push(vec![0.6 + off]);
            labels.push(Label::Benign);
            rows.push(vec![0.9 - off]);
            labels.push(Label::Malicious);
        }
        let d = FeatureMatrix::from_rows(&rows).unwrap();
        let l = LabelVector(labels);
        let (t, report) = prune_tree(&useful_child_tree(), &d, &l, &PruneParams::default()).unwrap();
        let rec = &report.decisions[0];
        assert_eq!(rec.e_st, 0.0);
        assert_eq!(rec.e_bl, 0.5);
        assert!(!rec.removed, "{rec:?}");
        assert_eq!(t.network_size(), 2);
        assert_eq!(report.maps_after, 2);
    }

    #[test]
    fn removes_when_subtree_is_no_better_than_a_leaf() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![0.6 + (i % 5) as f64 * 0.01]).collect();
        let d = FeatureMatrix::from_rows(&rows).unwrap();
        let l = LabelVector(vec![Label::Benign; 40]);
        let (t, report) = prune_tree(&useful_child_tree(), &d, &l, &PruneParams::default()).unwrap();
        assert_eq!(report.decisions[0].e_st, report.decisions[0].e_bl);
        assert_eq!(t.network_size(), 1);
        assert_eq!(report.removed_map_ids, vec![MapId(1)]);
        assert!((report.reduction_percent() - 50.0).abs() < 1e-12);
        assert_eq!(t.root().neuron(1).child_map_id, None);
        assert_eq!(t.root().neuron(1).label, Some(Label::Benign));
    }

    #[test]
    fn unreached_map_is_removed() {
        let d = FeatureMatrix::from_rows(&[vec![0.0], vec![0.05]]).unwrap();
        let l = LabelVector(vec![Label::Benign; 2]);
        let (t, report) = prune_tree(&useful_child_tree(), &d, &l, &PruneParams::default()).unwrap();
        assert_eq!(report.decisions[0].alpha, None);
        assert_eq!(t.network_size(), 1);
    }

    #[test]
    fn rejects_bad_delta() {
        let d = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        let l = LabelVector(vec![Label::Benign]);
        assert!(matches!(
            prune_tree(&useful_child_tree(), &d, &l, &PruneParams { delta: 0.0 }),
            Err(PruneError::InvalidDelta(_))
        ));
    }
}
