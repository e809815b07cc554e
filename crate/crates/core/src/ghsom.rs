//! Directed batch growing hierarchical SOM.
//!
//! Each map is trained horizontally with [`train_gsom`]. Afterwards the
//! map's total cumulative error `SE` sets a vertical threshold
//! `VT = LR · SE`; every neuron whose CE exceeds `VT` (and which holds at
//! least `min_child_samples` distinct-valued samples, below `max_depth`)
//! gets a child map trained only on the samples it wins. Children of one map train in
//! parallel; each child's seed is derived from its parent's seed and the
//! parent neuron id, so the tree does not depend on scheduling.

use crate::data::FeatureMatrix;
use crate::gsom::{train_gsom, GsomParams};
use crate::label::{Label, LabelVector};
use crate::map::{MapError, MapId, MapModel};
use crate::train::{derive_seed, Result as TrainResult, TrainError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GhsomParams {
    #[serde(flatten)]
    pub gsom: GsomParams,
    pub min_child_samples: usize,
    pub max_depth: usize,
}

impl Default for GhsomParams {
    fn default() -> Self {
        GhsomParams {
            gsom: GsomParams { spread_factor: 0.3, ..GsomParams::default() },
            min_child_samples: 8,
            max_depth: 10,
        }
    }
}

impl GhsomParams {
    pub fn validate(&self) -> TrainResult<()> {
        self.gsom.validate()?;
        if self.min_child_samples < 2 {
            return Err(TrainError::InvalidParam("min_child_samples must be at least 2".into()));
        }
        if self.max_depth == 0 {
            return Err(TrainError::InvalidParam("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// `VT = LR · SE`.
pub fn vertical_threshold(learning_rate: f64, sum_error: f64) -> f64 {
    learning_rate * sum_error
}

/// A hierarchy of maps. Neuron `child_map_id` links and the `parent` table
/// describe the same tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc", into = "TreeDoc")]
pub struct GhsomTree {
    root_id: MapId,
    maps: BTreeMap<MapId, MapModel>,
    parent: BTreeMap<MapId, (MapId, usize)>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    version: u32,
    root_id: MapId,
    maps: BTreeMap<MapId, MapModel>,
    parent: BTreeMap<MapId, (MapId, usize)>,
}

impl From<GhsomTree> for TreeDoc {
    fn from(t: GhsomTree) -> Self {
        TreeDoc { version: TREE_FORMAT_VERSION, root_id: t.root_id, maps: t.maps, parent: t.parent }
    }
}

impl TryFrom<TreeDoc> for GhsomTree {
    type Error = MapError;
    fn try_from(doc: TreeDoc) -> Result<Self, MapError> {
        if doc.version != TREE_FORMAT_VERSION {
            return Err(MapError::InvalidModel(format!("unsupported tree version {}", doc.version)));
        }
        GhsomTree::from_parts(doc.root_id, doc.maps, doc.parent)
    }
}

/// Hierarchical prediction with the descent path it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePrediction {
    pub label: Label,
    /// `(map, neuron)` pairs from the root to the terminal neuron.
    pub path: Vec<(MapId, usize)>,
}

impl GhsomTree {
    /// Validates and assembles a tree.
    pub fn from_parts(
        root_id: MapId,
        maps: BTreeMap<MapId, MapModel>,
        parent: BTreeMap<MapId, (MapId, usize)>,
    ) -> Result<Self, MapError> {
        let invalid = |msg: String| Err(MapError::InvalidModel(msg));
        let Some(root) = maps.get(&root_id) else {
            return invalid(format!("root map {root_id} missing"));
        };
        let dim = root.dim();
        if parent.contains_key(&root_id) {
            return invalid("root map has a parent".into());
        }
        for (id, m) in &maps {
            if m.map_id() != *id {
                return invalid(format!("map stored under {id} reports id {}", m.map_id()));
            }
            if m.dim() != dim {
                return invalid(format!("map {id} has dimension {}, root has {dim}", m.dim()));
            }
            if *id != root_id && !parent.contains_key(id) {
                return invalid(format!("map {id} has no parent"));
            }
            for n in m.neurons() {
                if let Some(c) = n.child_map_id {
                    if parent.get(&c) != Some(&(*id, n.id)) {
                        return invalid(format!("child link {id}/{} -> {c} not mirrored in parent table", n.id));
                    }
                }
            }
        }
        for (child, (pm, pn)) in &parent {
            let Some(p) = maps.get(pm) else {
                return invalid(format!("parent map {pm} of {child} missing"));
            };
            if !maps.contains_key(child) {
                return invalid(format!("parent entry for missing map {child}"));
            }
            if *pn >= p.len() || p.neuron(*pn).child_map_id != Some(*child) {
                return invalid(format!("parent entry {child} -> {pm}/{pn} not mirrored by a child link"));
            }
        }
        let tree = GhsomTree { root_id, maps, parent };
        // Every map reachable from the root exactly once rules out cycles.
        let reached = tree.subtree_ids(root_id);
        if reached.len() != tree.maps.len() {
            return invalid("maps unreachable from the root".into());
        }
        Ok(tree)
    }

    /// Single-map tree.
    pub fn from_map(mut map: MapModel) -> Self {
        map.set_map_id(MapId(0));
        for n in map.neurons_mut() {
            n.child_map_id = None;
        }
        let mut maps = BTreeMap::new();
        maps.insert(MapId(0), map);
        GhsomTree { root_id: MapId(0), maps, parent: BTreeMap::new() }
    }

    pub fn root_id(&self) -> MapId {
        self.root_id
    }

    pub fn root(&self) -> &MapModel {
        &self.maps[&self.root_id]
    }

    pub fn map(&self, id: MapId) -> Option<&MapModel> {
        self.maps.get(&id)
    }

    pub fn maps(&self) -> &BTreeMap<MapId, MapModel> {
        &self.maps
    }

    pub fn parent_of(&self, id: MapId) -> Option<(MapId, usize)> {
        self.parent.get(&id).copied()
    }

    pub fn parents(&self) -> &BTreeMap<MapId, (MapId, usize)> {
        &self.parent
    }

    pub fn dim(&self) -> usize {
        self.root().dim()
    }

    /// Number of maps in the hierarchy.
    pub fn network_size(&self) -> usize {
        self.maps.len()
    }

    /// Root depth is 0.
    pub fn depth(&self, id: MapId) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some((p, _)) = self.parent.get(&cur) {
            d += 1;
            cur = *p;
        }
        d
    }

    pub fn max_depth(&self) -> usize {
        self.maps.keys().map(|&id| self.depth(id)).max().unwrap_or(0)
    }

    /// Child map ids of `id`, ordered by parent neuron id.
    pub fn children_of(&self, id: MapId) -> Vec<MapId> {
        self.maps.get(&id).map(|m| m.neurons().iter().filter_map(|n| n.child_map_id).collect()).unwrap_or_default()
    }

    /// `id` and all of its descendants, pre-order.
    pub fn subtree_ids(&self, id: MapId) -> Vec<MapId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur) || !self.maps.contains_key(&cur) {
                continue;
            }
            out.push(cur);
            let mut kids = self.children_of(cur);
            kids.reverse();
            stack.extend(kids);
        }
        out
    }

    /// Maps in post-order (children before parents).
    pub fn post_order(&self) -> Vec<MapId> {
        fn visit(t: &GhsomTree, id: MapId, out: &mut Vec<MapId>) {
            for c in t.children_of(id) {
                visit(t, c, out);
            }
            out.push(id);
        }
        let mut out = Vec::with_capacity(self.maps.len());
        visit(self, self.root_id, &mut out);
        out
    }

    /// Deletes `id` and its descendants and clears the parent neuron's link.
    /// Returns the removed ids. The root cannot be removed.
    pub fn remove_subtree(&mut self, id: MapId) -> Vec<MapId> {
        if id == self.root_id || !self.maps.contains_key(&id) {
            return Vec::new();
        }
        let removed = self.subtree_ids(id);
        if let Some((pm, pn)) = self.parent.get(&id).copied() {
            if let Some(p) = self.maps.get_mut(&pm) {
                p.neuron_mut(pn).child_map_id = None;
            }
        }
        for r in &removed {
            self.maps.remove(r);
            self.parent.remove(r);
        }
        removed
    }

    /// Descends from `start` to a terminal neuron.
    pub fn predict_from(&self, start: MapId, sample: &[f64]) -> Result<TreePrediction, MapError> {
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            let map = self.maps.get(&cur).ok_or_else(|| MapError::InvalidModel(format!("map {cur} missing")))?;
            let (b, _) = map.bmu(sample)?;
            path.push((cur, b));
            match map.neuron(b).child_map_id {
                Some(c) => cur = c,
                None => break,
            }
        }
        let label = self.terminal_label(&path)?;
        Ok(TreePrediction { label, path })
    }

    /// Terminal neuron's label, else the nearest labelled neuron of its map,
    /// else the closest labelled ancestor neuron on the path.
    fn terminal_label(&self, path: &[(MapId, usize)]) -> Result<Label, MapError> {
        let &(m, n) = path.last().expect("non-empty path");
        if let Some(l) = self.maps[&m].effective_label(n) {
            return Ok(l);
        }
        path.iter()
            .rev()
            .skip(1)
            .find_map(|(m, n)| self.maps[m].neuron(*n).label)
            .or_else(|| {
                let mut cur = path[0].0;
                while let Some((pm, pn)) = self.parent.get(&cur) {
                    if let Some(l) = self.maps[pm].neuron(*pn).label {
                        return Some(l);
                    }
                    cur = *pm;
                }
                None
            })
            .ok_or(MapError::Unlabeled(n))
    }

    pub fn predict(&self, sample: &[f64]) -> Result<TreePrediction, MapError> {
        self.predict_from(self.root_id, sample)
    }

    /// Sample indices reaching each map during descent from the root.
    pub fn route(&self, data: &FeatureMatrix) -> Result<BTreeMap<MapId, Vec<usize>>, MapError> {
        let mut local: BTreeMap<MapId, Vec<usize>> = self.maps.keys().map(|&k| (k, Vec::new())).collect();
        for (i, row) in data.rows().enumerate() {
            let mut cur = self.root_id;
            loop {
                local.get_mut(&cur).expect("map exists").push(i);
                let (b, _) = self.maps[&cur].bmu(row)?;
                match self.maps[&cur].neuron(b).child_map_id {
                    Some(c) => cur = c,
                    None => break,
                }
            }
        }
        Ok(local)
    }
}

/// Hierarchical prediction; see [`GhsomTree::predict`].
pub fn predict_ghsom(tree: &GhsomTree, sample: &[f64]) -> Result<TreePrediction, MapError> {
    tree.predict(sample)
}

pub fn network_size(tree: &GhsomTree) -> usize {
    tree.network_size()
}

#[derive(Debug, Clone)]
pub struct GhsomOutcome {
    pub tree: GhsomTree,
    /// True when any map hit its node budget.
    pub budget_exceeded: bool,
}

struct Subtree {
    map: MapModel,
    budget_exceeded: bool,
    children: Vec<(usize, Subtree)>,
}

pub fn train_ghsom(data: &FeatureMatrix, labels: &LabelVector, p: &GhsomParams) -> TrainResult<GhsomOutcome> {
    p.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if labels.len() != data.n_samples() {
        return Err(TrainError::LengthMismatch { samples: data.n_samples(), labels: labels.len() });
    }
    let sub = grow(data, labels, p, p.gsom.seed, 0)?;
    let mut maps = BTreeMap::new();
    let mut parent = BTreeMap::new();
    let mut budget_exceeded = false;
    let mut next_id = 0u32;
    flatten(sub, None, &mut next_id, &mut maps, &mut parent, &mut budget_exceeded);
    let tree = GhsomTree::from_parts(MapId(0), maps, parent)?;
    Ok(GhsomOutcome { tree, budget_exceeded })
}

fn grow(data: &FeatureMatrix, labels: &LabelVector, p: &GhsomParams, seed: u64, depth: usize) -> TrainResult<Subtree> {
    let gp = GsomParams { seed, ..p.gsom.clone() };
    let out = train_gsom(data, &gp)?;
    let mut map = out.map;
    map.assign_labels(data, labels)?;
    let groups = map.hits(data)?;
    let se: f64 = map.neurons().iter().map(|n| n.cumulative_error).sum();
    let vt = vertical_threshold(p.gsom.learning_rate, se);
    let expand: Vec<usize> = if depth < p.max_depth {
        map.neurons()
            .iter()
            .filter(|n| n.cumulative_error > vt && n.hit_count >= p.min_child_samples)
            .map(|n| n.id)
            .filter(|&id| has_spread(data, &groups[id]))
            .collect()
    } else {
        Vec::new()
    };
    let children = expand
        .par_iter()
        .map(|&id| {
            let local = &groups[id];
            let sub = grow(&data.subset(local), &labels.select(local), p, derive_seed(seed, id as u64), depth + 1)?;
            Ok((id, sub))
        })
        .collect::<TrainResult<Vec<_>>>()?;
    Ok(Subtree { map, budget_exceeded: out.budget_exceeded, children })
}

/// False when every listed sample is the same point; such a neuron gains
/// nothing from a child map.
fn has_spread(data: &FeatureMatrix, idx: &[usize]) -> bool {
    let Some((&first, rest)) = idx.split_first() else {
        return false;
    };
    rest.iter().any(|&i| data.row(i) != data.row(first))
}

fn flatten(
    sub: Subtree,
    link: Option<(MapId, usize)>,
    next_id: &mut u32,
    maps: &mut BTreeMap<MapId, MapModel>,
    parent: &mut BTreeMap<MapId, (MapId, usize)>,
    budget_exceeded: &mut bool,
) {
    let id = MapId(*next_id);
    *next_id += 1;
    let Subtree { mut map, budget_exceeded: exceeded, children } = sub;
    *budget_exceeded |= exceeded;
    map.set_map_id(id);
    if let Some(l) = link {
        parent.insert(id, l);
    }
    let mut links = Vec::new();
    for (neuron, child) in children {
        let child_id = MapId(*next_id);
        links.push((neuron, child_id));
        flatten(child, Some((id, neuron)), next_id, maps, parent, budget_exceeded);
    }
    for (neuron, child_id) in links {
        map.neuron_mut(neuron).child_map_id = Some(child_id);
    }
    maps.insert(id, map);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{Coord, Neuron};

    fn labelled_map(id: u32, weights: &[f64], labels: &[Label]) -> MapModel {
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

    fn two_level() -> GhsomTree {
        let mut root = labelled_map(0, &[0.2, 0.8], &[Label::Benign, Label::Benign]);
        root.neuron_mut(1).child_map_id = Some(MapId(1));
        let child = labelled_map(1, &[0.7, 0.95], &[Label::Benign, Label::Malicious]);
        let maps = BTreeMap::from([(MapId(0), root), (MapId(1), child)]);
        let parent = BTreeMap::from([(MapId(1), (MapId(0), 1))]);
        GhsomTree::from_parts(MapId(0), maps, parent).unwrap()
    }

    #[test]
    fn vertical_threshold_product() {
        assert!((vertical_threshold(0.006, 100.0) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn descent_follows_child_links() {
        let t = two_level();
        let p = t.predict(&[0.99]).unwrap();
        assert_eq!(p.path, vec![(MapId(0), 1), (MapId(1), 1)]);
        assert_eq!(p.label, Label::Malicious);
        let p = t.predict(&[0.1]).unwrap();
        assert_eq!(p.path.len(), 1);
        assert_eq!(t.network_size(), 2);
        assert_eq!(t.depth(MapId(1)), 1);
        assert_eq!(t.post_order(), vec![MapId(1), MapId(0)]);
    }

    #[test]
    fn rejects_inconsistent_links() {
        let t = two_level();
        let mut maps = t.maps().clone();
        maps.get_mut(&MapId(0)).unwrap().neuron_mut(1).child_map_id = None;
        assert!(GhsomTree::from_parts(MapId(0), maps, t.parents().clone()).is_err());
        let mut parents = t.parents().clone();
        parents.insert(MapId(1), (MapId(0), 0));
        assert!(GhsomTree::from_parts(MapId(0), t.maps().clone(), parents).is_err());
    }

    #[test]
    fn remove_subtree_clears_link() {
        let mut t = two_level();
        assert!(t.remove_subtree(MapId(0)).is_empty());
        assert_eq!(t.remove_subtree(MapId(1)), vec![MapId(1)]);
        assert_eq!(t.network_size(), 1);
        assert_eq!(t.root().neuron(1).child_map_id, None);
        assert_eq!(t.predict(&[0.99]).unwrap().label, Label::Benign);
    }

    #[test]
    fn identical_points_give_root_only() {
        let d = FeatureMatrix::from_rows(&vec![vec![0.25, 0.75]; 8]).unwrap();
        let l = LabelVector(vec![Label::Benign; 8]);
        let p = GhsomParams { gsom: GsomParams { epochs: 30, learning_rate: 0.3, ..GhsomParams::default().gsom }, ..Default::default() };
        let out = train_ghsom(&d, &l, &p).unwrap();
        assert_eq!(out.tree.network_size(), 1);
    }

    #[test]
    fn json_round_trip() {
        let t = two_level();
        let text = serde_json::to_string(&t).unwrap();
        let back: GhsomTree = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
