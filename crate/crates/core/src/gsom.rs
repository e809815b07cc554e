//! Directed batch growing self-organizing map.
//!
//! Training starts from a 2×2 lattice and runs epoch-wise:
//!
//! 1. every neuron's cumulative error (CE) is reset;
//! 2. each sample is presented once in a seeded shuffled order. The BMU
//!    moves by `LR`, its orthogonal neighbours by `LR / 2`, and the BMU's CE
//!    grows by the sample distance;
//! 3. interior neurons whose CE exceeds the growth threshold hand a quarter
//!    of it to each neighbour and drop to zero;
//! 4. boundary neurons whose CE exceeds the threshold each spawn one neuron
//!    in a free orthogonal slot.
//!
//! After the last epoch a read-only pass records per-neuron hit counts and
//! CE, which the hierarchical trainer uses for vertical growth.

use crate::data::FeatureMatrix;
use crate::map::{euclidean, Coord, MapId, MapModel, Neuron};
use crate::train::{Result, TrainError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_NODES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsomParams {
    pub spread_factor: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub max_nodes: usize,
}

impl Default for GsomParams {
    fn default() -> Self {
        GsomParams { spread_factor: 0.9, learning_rate: 0.006, epochs: 100, seed: 0, max_nodes: DEFAULT_MAX_NODES }
    }
}

impl GsomParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spread_factor > 0.0 && self.spread_factor < 1.0) {
            return Err(TrainError::InvalidParam(format!("spread factor {} not in (0, 1)", self.spread_factor)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(TrainError::InvalidParam(format!("learning rate {} not in (0, 1)", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidParam("epochs must be at least 1".into()));
        }
        if self.max_nodes < 4 {
            return Err(TrainError::InvalidParam("max_nodes must allow the four starter nodes".into()));
        }
        Ok(())
    }
}

/// `GT = -D · ln(SF)`.
pub fn growth_threshold(dim: usize, spread_factor: f64) -> Result<f64> {
    if dim == 0 {
        return Err(TrainError::InvalidParam("dimension must be at least 1".into()));
    }
    if !(spread_factor > 0.0 && spread_factor < 1.0) {
        return Err(TrainError::InvalidParam(format!("spread factor {spread_factor} not in (0, 1)")));
    }
    Ok(-(dim as f64) * spread_factor.ln())
}

#[derive(Debug, Clone)]
pub struct GsomOutcome {
    pub map: MapModel,
    /// Node count after each epoch's growth step.
    pub node_counts: Vec<usize>,
    /// Set when growth was cut short by `max_nodes`.
    pub budget_exceeded: bool,
}

/// The four starter nodes on {0,1}² with uniform random weights.
pub fn init_gsom(dim: usize, seed: u64, rng: &mut impl Rng) -> Result<MapModel> {
    Ok(MapModel::grid(MapId(0), 2, 2, dim, seed, |_| (0..dim).map(|_| rng.random::<f64>()).collect())?)
}

pub fn train_gsom(data: &FeatureMatrix, p: &GsomParams) -> Result<GsomOutcome> {
    p.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let gt = growth_threshold(data.dim(), p.spread_factor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut map = init_gsom(data.dim(), p.seed, &mut rng)?;
    let mut order: Vec<usize> = (0..data.n_samples()).collect();
    let mut node_counts = Vec::with_capacity(p.epochs);
    let mut budget_exceeded = false;

    for _ in 0..p.epochs {
        let mut ce = vec![0.0; map.len()];
        order.shuffle(&mut rng);
        for &i in &order {
            let x = data.row(i);
            let (bmu, d2) = map.bmu_sq(x);
            ce[bmu] += d2.sqrt();
            pull(&mut map.neuron_mut(bmu).weights, x, p.learning_rate);
            let neighbors: Vec<usize> = map.neighbors_of(bmu).collect();
            for nb in neighbors {
                pull(&mut map.neuron_mut(nb).weights, x, p.learning_rate / 2.0);
            }
        }

        let ce = distribute_errors(&map, &ce, gt);
        let candidates: Vec<usize> = (0..map.len()).filter(|&id| ce[id] > gt && map.is_boundary(id)).collect();
        for id in candidates {
            if map.len() >= p.max_nodes {
                budget_exceeded = true;
                break;
            }
            if let Some(slot) = choose_slot(&map, id) {
                let w = newborn_weights(&map, id, slot, &mut rng);
                map.push_neuron(slot, w);
            }
        }
        node_counts.push(map.len());
    }

    record_errors(&mut map, data);
    Ok(GsomOutcome { map, node_counts, budget_exceeded })
}

#[inline]
fn pull(w: &mut [f64], x: &[f64], rate: f64) {
    for (wi, xi) in w.iter_mut().zip(x) {
        *wi -= rate * (*wi - xi);
    }
}

/// Interior neurons with CE above `gt` split it equally among their four
/// neighbours. All transfers use the pre-distribution values.
fn distribute_errors(map: &MapModel, ce: &[f64], gt: f64) -> Vec<f64> {
    let mut next = ce.to_vec();
    let mut incoming = vec![0.0; ce.len()];
    for id in 0..map.len() {
        if ce[id] > gt && !map.is_boundary(id) {
            next[id] = 0.0;
            for nb in map.neighbors_of(id) {
                incoming[nb] += ce[id] / 4.0;
            }
        }
    }
    next.iter().zip(&incoming).map(|(a, b)| a + b).collect()
}

/// Free slot for a new neighbour of `id`. Among free slots whose opposite
/// slot is occupied, the one whose opposite neighbour is closest in weight
/// space wins; otherwise the first free slot in N, E, S, W order.
fn choose_slot(map: &MapModel, id: usize) -> Option<Coord> {
    let parent = map.neuron(id);
    let free: Vec<Coord> = parent.coord.neighbors().into_iter().filter(|c| map.at(*c).is_none()).collect();
    let mut best: Option<(Coord, f64)> = None;
    for &slot in &free {
        if let Some(opp) = map.at(opposite(parent.coord, slot)) {
            let d = euclidean(&parent.weights, &map.neuron(opp).weights);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((slot, d));
            }
        }
    }
    best.map(|(c, _)| c).or_else(|| free.first().copied())
}

fn opposite(center: Coord, slot: Coord) -> Coord {
    Coord::new(2 * center.row - slot.row, 2 * center.col - slot.col)
}

/// Linear extrapolation away from the opposite neighbour, or parent weights
/// plus ±0.01 jitter when there is none; clamped to `[0, 1]`.
fn newborn_weights(map: &MapModel, id: usize, slot: Coord, rng: &mut impl Rng) -> Vec<f64> {
    let parent = map.neuron(id);
    match map.at(opposite(parent.coord, slot)) {
        Some(opp) => parent
            .weights
            .iter()
            .zip(&map.neuron(opp).weights)
            .map(|(p, o)| (2.0 * p - o).clamp(0.0, 1.0))
            .collect(),
        None => parent.weights.iter().map(|p| (p + rng.random_range(-0.01..=0.01)).clamp(0.0, 1.0)).collect(),
    }
}

/// Read-only pass: hit counts and cumulative error per neuron.
pub fn record_errors(map: &mut MapModel, data: &FeatureMatrix) {
    let mut hits = vec![0usize; map.len()];
    let mut ce = vec![0.0; map.len()];
    for row in data.rows() {
        let (b, d2) = map.bmu_sq(row);
        hits[b] += 1;
        ce[b] += d2.sqrt();
    }
    for (n, (h, e)) in map.neurons_mut().iter_mut().zip(hits.into_iter().zip(ce)) {
        let n: &mut Neuron = n;
        n.hit_count = h;
        n.cumulative_error = e;
    }
}
