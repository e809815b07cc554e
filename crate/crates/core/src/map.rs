//! Neuron lattice shared by the fixed-grid and growing maps: best-matching
//! unit search, node labelling, flat prediction and map-quality metrics.

use crate::data::FeatureMatrix;
use crate::label::{Label, LabelVector};
use crate::stats;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Version tag written into serialized maps.
pub const MAP_FORMAT_VERSION: u32 = 1;

/// Significance level for the embedding-accuracy tests.
pub const EMBEDDING_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("sample has {got} features, map expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("map has no neurons")]
    EmptyMap,
    #[error("operation needs at least {needed} neurons, map has {got}")]
    MapTooSmall { needed: usize, got: usize },
    #[error("no samples given")]
    EmptyData,
    #[error("{labels} labels for {samples} samples")]
    LengthMismatch { samples: usize, labels: usize },
    #[error("no neuron received a training sample")]
    NoLabeledNeuron,
    #[error("neuron {0} has no label; call assign_labels first")]
    Unlabeled(usize),
    #[error("invalid map: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, MapError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MapId(pub u32);

impl fmt::Display for MapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Integer lattice position. Growing maps may reach negative coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Coord {
    pub row: i32,
    pub col: i32,
}

impl Coord {
    pub const fn new(row: i32, col: i32) -> Self {
        Coord { row, col }
    }

    /// Orthogonal neighbour slots in N, E, S, W order.
    pub fn neighbors(self) -> [Coord; 4] {
        [
            Coord::new(self.row - 1, self.col),
            Coord::new(self.row, self.col + 1),
            Coord::new(self.row + 1, self.col),
            Coord::new(self.row, self.col - 1),
        ]
    }

    pub fn is_adjacent(self, other: Coord) -> bool {
        (self.row - other.row).abs() + (self.col - other.col).abs() == 1
    }

    pub fn chebyshev(self, other: Coord) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }
}

impl From<[i32; 2]> for Coord {
    fn from(v: [i32; 2]) -> Self {
        Coord::new(v[0], v[1])
    }
}

impl From<Coord> for [i32; 2] {
    fn from(c: Coord) -> Self {
        [c.row, c.col]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub id: usize,
    pub coord: Coord,
    pub weights: Vec<f64>,
    pub hit_count: usize,
    pub cumulative_error: f64,
    pub label: Option<Label>,
    pub child_map_id: Option<MapId>,
}

impl Neuron {
    pub fn new(id: usize, coord: Coord, weights: Vec<f64>) -> Self {
        Neuron { id, coord, weights, hit_count: 0, cumulative_error: 0.0, label: None, child_map_id: None }
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub quantization_error: f64,
    pub topographic_error: f64,
    pub embedding_accuracy: f64,
    pub convergence_index: f64,
}

/// A square lattice of neurons with 4-neighbour connectivity.
///
/// Neuron ids are dense: `neurons()[i].id == i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapDoc", into = "MapDoc")]
pub struct MapModel {
    map_id: MapId,
    dim: usize,
    seed: u64,
    neurons: Vec<Neuron>,
    index: HashMap<Coord, usize>,
}

#[derive(Serialize, Deserialize)]
struct MapDoc {
    version: u32,
    map_id: MapId,
    #[serde(rename = "D")]
    dim: usize,
    seed: u64,
    neurons: Vec<Neuron>,
}

impl From<MapModel> for MapDoc {
    fn from(m: MapModel) -> Self {
        MapDoc { version: MAP_FORMAT_VERSION, map_id: m.map_id, dim: m.dim, seed: m.seed, neurons: m.neurons }
    }
}

impl TryFrom<MapDoc> for MapModel {
    type Error = MapError;
    fn try_from(doc: MapDoc) -> Result<Self> {
        if doc.version != MAP_FORMAT_VERSION {
            return Err(MapError::InvalidModel(format!("unsupported map version {}", doc.version)));
        }
        MapModel::from_neurons(doc.map_id, doc.dim, doc.seed, doc.neurons)
    }
}

impl MapModel {
    /// Assembles a map from neurons given in any order. Ids must be exactly
    /// `0..n`, coordinates unique and the lattice connected.
    pub fn from_neurons(map_id: MapId, dim: usize, seed: u64, mut neurons: Vec<Neuron>) -> Result<Self> {
        if dim == 0 {
            return Err(MapError::InvalidModel("dimension must be positive".into()));
        }
        neurons.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(neurons.len());
        for (i, n) in neurons.iter().enumerate() {
            if n.id != i {
                return Err(MapError::InvalidModel(format!("neuron ids must be 0..{}, found {}", neurons.len(), n.id)));
            }
            if n.weights.len() != dim {
                return Err(MapError::InvalidModel(format!("neuron {} has {} weights, expected {dim}", n.id, n.weights.len())));
            }
            if n.weights.iter().any(|w| !w.is_finite()) || n.cumulative_error.is_nan() || n.cumulative_error < 0.0 {
                return Err(MapError::InvalidModel(format!("neuron {} has non-finite or negative values", n.id)));
            }
            if index.insert(n.coord, i).is_some() {
                return Err(MapError::InvalidModel(format!("duplicate coordinate {:?}", n.coord)));
            }
        }
        let map = MapModel { map_id, dim, seed, neurons, index };
        if map.len() > 1 {
            if let Some(lonely) = (0..map.len()).find(|&i| map.neighbors_of(i).next().is_none()) {
                return Err(MapError::InvalidModel(format!("neuron {lonely} has no lattice neighbour")));
            }
        }
        Ok(map)
    }

    /// `rows × cols` lattice with row-major ids and weights from `init`.
    pub fn grid(
        map_id: MapId,
        rows: usize,
        cols: usize,
        dim: usize,
        seed: u64,
        mut init: impl FnMut(usize) -> Vec<f64>,
    ) -> Result<Self> {
        let neurons = (0..rows * cols)
            .map(|i| Neuron::new(i, Coord::new((i / cols) as i32, (i % cols) as i32), init(i)))
            .collect();
        Self::from_neurons(map_id, dim, seed, neurons)
    }

    pub fn map_id(&self) -> MapId {
        self.map_id
    }

    pub(crate) fn set_map_id(&mut self, id: MapId) {
        self.map_id = id;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn neuron(&self, id: usize) -> &Neuron {
        &self.neurons[id]
    }

    pub(crate) fn neuron_mut(&mut self, id: usize) -> &mut Neuron {
        &mut self.neurons[id]
    }

    pub(crate) fn neurons_mut(&mut self) -> &mut [Neuron] {
        &mut self.neurons
    }

    pub fn at(&self, coord: Coord) -> Option<usize> {
        self.index.get(&coord).copied()
    }

    /// Adds a neuron at a free coordinate and returns its id.
    pub(crate) fn push_neuron(&mut self, coord: Coord, weights: Vec<f64>) -> usize {
        debug_assert!(!self.index.contains_key(&coord));
        debug_assert_eq!(weights.len(), self.dim);
        let id = self.neurons.len();
        self.neurons.push(Neuron::new(id, coord, weights));
        self.index.insert(coord, id);
        id
    }

    /// Ids of occupied orthogonal neighbours in N, E, S, W order.
    pub fn neighbors_of(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.neurons[id].coord.neighbors().into_iter().filter_map(|c| self.at(c))
    }

    /// A neuron is on the boundary when at least one orthogonal slot is free.
    pub fn is_boundary(&self, id: usize) -> bool {
        self.neighbors_of(id).count() < 4
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.neurons[a].coord.is_adjacent(self.neurons[b].coord)
    }

    fn check_dim(&self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.dim {
            return Err(MapError::DimensionMismatch { expected: self.dim, got: sample.len() });
        }
        Ok(())
    }

    fn check_data(&self, data: &FeatureMatrix) -> Result<()> {
        if data.is_empty() {
            return Err(MapError::EmptyData);
        }
        if data.dim() != self.dim {
            return Err(MapError::DimensionMismatch { expected: self.dim, got: data.dim() });
        }
        Ok(())
    }

    /// Best-matching unit and its squared distance, without checks.
    #[inline]
    pub(crate) fn bmu_sq(&self, sample: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.neurons.iter().enumerate() {
            let d = squared_distance(&n.weights, sample);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Nearest neuron by Euclidean distance; ties go to the smallest id.
    pub fn bmu(&self, sample: &[f64]) -> Result<(usize, f64)> {
        self.check_dim(sample)?;
        if self.neurons.is_empty() {
            return Err(MapError::EmptyMap);
        }
        let (id, d2) = self.bmu_sq(sample);
        Ok((id, d2.sqrt()))
    }

    /// Nearest and second-nearest neurons, same tie rule as [`Self::bmu`].
    pub fn bmu_pair(&self, sample: &[f64]) -> Result<(usize, usize)> {
        self.check_dim(sample)?;
        if self.neurons.len() < 2 {
            return Err(MapError::MapTooSmall { needed: 2, got: self.neurons.len() });
        }
        let mut first = (usize::MAX, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for (i, n) in self.neurons.iter().enumerate() {
            let d = squared_distance(&n.weights, sample);
            if d < first.1 {
                second = first;
                first = (i, d);
            } else if d < second.1 {
                second = (i, d);
            }
        }
        Ok((first.0, second.0))
    }

    /// Sample indices grouped by their BMU.
    pub fn hits(&self, data: &FeatureMatrix) -> Result<Vec<Vec<usize>>> {
        if data.dim() != self.dim {
            return Err(MapError::DimensionMismatch { expected: self.dim, got: data.dim() });
        }
        if self.neurons.is_empty() {
            return Err(MapError::EmptyMap);
        }
        let mut groups = vec![Vec::new(); self.neurons.len()];
        for (i, row) in data.rows().enumerate() {
            groups[self.bmu_sq(row).0].push(i);
        }
        Ok(groups)
    }

    /// Labels every neuron with the majority class of its mapped samples
    /// (ties go to malicious) and records hit counts. Neurons without hits
    /// copy the label of the nearest labelled neuron in weight space.
    pub fn assign_labels(&mut self, data: &FeatureMatrix, labels: &LabelVector) -> Result<()> {
        self.check_data(data)?;
        if labels.len() != data.n_samples() {
            return Err(MapError::LengthMismatch { samples: data.n_samples(), labels: labels.len() });
        }
        let groups = self.hits(data)?;
        for (n, group) in self.neurons.iter_mut().zip(&groups) {
            n.hit_count = group.len();
            n.label = if group.is_empty() {
                None
            } else {
                let malicious = group.iter().filter(|&&i| labels[i] == Label::Malicious).count();
                Some(Label::majority(group.len() - malicious, malicious))
            };
        }
        self.fill_unlabeled()
    }

    /// Gives every unlabelled neuron the label of its nearest labelled
    /// neuron in weight space.
    pub(crate) fn fill_unlabeled(&mut self) -> Result<()> {
        let labeled: Vec<usize> = (0..self.neurons.len()).filter(|&i| self.neurons[i].label.is_some()).collect();
        if labeled.is_empty() {
            return Err(MapError::NoLabeledNeuron);
        }
        let fills: Vec<(usize, Label)> = (0..self.neurons.len())
            .filter(|&i| self.neurons[i].label.is_none())
            .map(|i| {
                let src = self.nearest_among(&self.neurons[i].weights, &labeled);
                (i, self.neurons[src].label.expect("labelled"))
            })
            .collect();
        for (i, l) in fills {
            self.neurons[i].label = Some(l);
        }
        Ok(())
    }

    fn nearest_among(&self, w: &[f64], candidates: &[usize]) -> usize {
        let mut best = (candidates[0], f64::INFINITY);
        for &c in candidates {
            let d = squared_distance(w, &self.neurons[c].weights);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }

    /// Label of the nearest labelled neuron to neuron `id` (itself if labelled).
    pub fn effective_label(&self, id: usize) -> Option<Label> {
        if let Some(l) = self.neurons[id].label {
            return Some(l);
        }
        let labeled: Vec<usize> = (0..self.neurons.len()).filter(|&i| self.neurons[i].label.is_some()).collect();
        if labeled.is_empty() {
            return None;
        }
        self.neurons[self.nearest_among(&self.neurons[id].weights, &labeled)].label
    }

    /// Label of the sample's BMU.
    pub fn predict_flat(&self, sample: &[f64]) -> Result<Label> {
        let (id, _) = self.bmu(sample)?;
        self.neurons[id].label.ok_or(MapError::Unlabeled(id))
    }

    /// Mean Euclidean distance from each sample to its BMU.
    pub fn quantization_error(&self, data: &FeatureMatrix) -> Result<f64> {
        self.check_data(data)?;
        if self.neurons.is_empty() {
            return Err(MapError::EmptyMap);
        }
        let total: f64 = data.rows().map(|r| self.bmu_sq(r).1.sqrt()).sum();
        Ok(total / data.n_samples() as f64)
    }

    /// Fraction of samples whose two nearest neurons are not lattice neighbours.
    pub fn topographic_error(&self, data: &FeatureMatrix) -> Result<f64> {
        self.check_data(data)?;
        let mut errors = 0usize;
        for row in data.rows() {
            let (a, b) = self.bmu_pair(row)?;
            if !self.are_adjacent(a, b) {
                errors += 1;
            }
        }
        Ok(errors as f64 / data.n_samples() as f64)
    }

    /// Fraction of features whose data column and neuron-weight column pass
    /// both a Welch mean test and an F variance test at [`EMBEDDING_ALPHA`].
    pub fn embedding_accuracy(&self, data: &FeatureMatrix) -> Result<f64> {
        self.check_data(data)?;
        if data.n_samples() < 2 {
            return Err(MapError::EmptyData);
        }
        if self.neurons.len() < 2 {
            return Err(MapError::MapTooSmall { needed: 2, got: self.neurons.len() });
        }
        let mut embedded = 0usize;
        for f in 0..self.dim {
            let x = data.column(f);
            let w: Vec<f64> = self.neurons.iter().map(|n| n.weights[f]).collect();
            if stats::welch_t_test(&x, &w) >= EMBEDDING_ALPHA && stats::f_test(&x, &w) >= EMBEDDING_ALPHA {
                embedded += 1;
            }
        }
        Ok(embedded as f64 / self.dim as f64)
    }

    pub fn convergence_index(&self, data: &FeatureMatrix) -> Result<f64> {
        Ok(convergence_index(self.embedding_accuracy(data)?, self.topographic_error(data)?))
    }

    pub fn quality(&self, data: &FeatureMatrix) -> Result<QualityReport> {
        let embedding_accuracy = self.embedding_accuracy(data)?;
        let topographic_error = self.topographic_error(data)?;
        Ok(QualityReport {
            quantization_error: self.quantization_error(data)?,
            topographic_error,
            embedding_accuracy,
            convergence_index: convergence_index(embedding_accuracy, topographic_error),
        })
    }
}

/// Equal-weight blend of embedding accuracy and topographic preservation.
pub fn convergence_index(embedding_accuracy: f64, topographic_error: f64) -> f64 {
    0.5 * embedding_accuracy + 0.5 * (1.0 - topographic_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_map(weights: &[Vec<f64>]) -> MapModel {
        let w = weights.to_vec();
        MapModel::grid(MapId(0), 1, weights.len(), weights[0].len(), 0, |i| w[i].clone()).unwrap()
    }

    fn data(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn bmu_identity_and_hand_distance() {
        let m = line_map(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(m.bmu(&[1.0, 1.0]).unwrap(), (1, 0.0));
        let (id, d) = m.bmu(&[0.1, 0.1]).unwrap();
        assert_eq!(id, 0);
        assert!((d - 0.1414213562373095).abs() < 1e-12);
        assert_eq!(m.bmu(&[0.1]), Err(MapError::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn bmu_pair_rules() {
        let single = line_map(&[vec![0.5]]);
        assert_eq!(single.bmu_pair(&[0.5]), Err(MapError::MapTooSmall { needed: 2, got: 1 }));
        let twins = line_map(&[vec![0.3], vec![0.3], vec![0.3]]);
        assert_eq!(twins.bmu_pair(&[0.9]).unwrap(), (0, 1));
    }

    #[test]
    fn majority_labels_with_tie_to_malicious() {
        let mut m = line_map(&[vec![0.0], vec![0.5], vec![1.0]]);
        let d = data(&[vec![0.0], vec![0.01], vec![0.02], vec![0.5], vec![0.51]]);
        let l = LabelVector(vec![Label::Benign, Label::Benign, Label::Malicious, Label::Benign, Label::Malicious]);
        m.assign_labels(&d, &l).unwrap();
        assert_eq!(m.neuron(0).label, Some(Label::Benign));
        assert_eq!(m.neuron(1).label, Some(Label::Malicious));
        assert_eq!(m.neuron(0).hit_count, 3);
        // zero-hit neuron at 1.0 is nearest to neuron 1 in weight space
        assert_eq!(m.neuron(2).hit_count, 0);
        assert_eq!(m.neuron(2).label, Some(Label::Malicious));
    }

    #[test]
    fn predict_requires_labels() {
        let m = line_map(&[vec![0.0], vec![1.0]]);
        assert_eq!(m.predict_flat(&[0.1]), Err(MapError::Unlabeled(0)));
    }

    #[test]
    fn quantization_error_cases() {
        let m = line_map(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(m.quantization_error(&data(&[vec![0.0, 0.0], vec![1.0, 1.0]])).unwrap(), 0.0);
        assert!((m.quantization_error(&data(&[vec![0.3, 0.4]])).unwrap() - 0.5).abs() < 1e-12);
        let empty = FeatureMatrix::new(vec![], 2, vec!["a".into(), "b".into()], vec![(0.0, 1.0); 2]).unwrap();
        assert_eq!(m.quantization_error(&empty), Err(MapError::EmptyData));
    }

    #[test]
    fn topographic_error_on_line() {
        let m = line_map(&[vec![0.0], vec![0.2], vec![1.0]]);
        // nearest pair (0,1) is adjacent
        assert_eq!(m.topographic_error(&data(&[vec![0.05]])).unwrap(), 0.0);
        // 3x1 map whose ends are nearest to the sample: middle weight is far away
        let ends = line_map(&[vec![0.5], vec![0.0], vec![0.5]]);
        assert_eq!(ends.topographic_error(&data(&[vec![0.6]])).unwrap(), 1.0);
    }

    #[test]
    fn embedding_accuracy_extremes() {
        let zeros = line_map(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0]]);
        let d = data(&[vec![0.4], vec![0.5], vec![0.6], vec![0.5]]);
        assert_eq!(zeros.embedding_accuracy(&d).unwrap(), 0.0);
        let same = line_map(&[vec![0.4], vec![0.5], vec![0.6], vec![0.5]]);
        assert_eq!(same.embedding_accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn convergence_index_arithmetic() {
        assert_eq!(convergence_index(1.0, 0.0), 1.0);
        assert_eq!(convergence_index(0.0, 1.0), 0.0);
        assert!((convergence_index(0.8, 0.2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_disconnected_or_duplicate_layout() {
        let n = vec![Neuron::new(0, Coord::new(0, 0), vec![0.1]), Neuron::new(1, Coord::new(0, 2), vec![0.2])];
        assert!(MapModel::from_neurons(MapId(0), 1, 0, n).is_err());
        let n = vec![Neuron::new(0, Coord::new(0, 0), vec![0.1]), Neuron::new(1, Coord::new(0, 0), vec![0.2])];
        assert!(MapModel::from_neurons(MapId(0), 1, 0, n).is_err());
        let n = vec![Neuron::new(0, Coord::new(0, 0), vec![0.1]), Neuron::new(2, Coord::new(0, 1), vec![0.2])];
        assert!(MapModel::from_neurons(MapId(0), 1, 0, n).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = line_map(&[vec![0.1, 1.0 / 3.0], vec![0.7, 2.0f64.sqrt() / 2.0]]);
        m.neuron_mut(1).label = Some(Label::Malicious);
        m.neuron_mut(1).child_map_id = Some(MapId(4));
        m.neuron_mut(0).cumulative_error = 0.123456789012345;
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"version\":1") && text.contains("\"D\":2"));
        let back: MapModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
