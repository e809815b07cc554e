//! Fixed-grid self-organizing map trainer.
//!
//! Each iteration draws one training sample uniformly at random, finds its
//! BMU and pulls the BMU and its lattice neighbourhood towards the sample:
//!
//! ```text
//! w <- w - λ(t, d) · (w - x)
//! λ(t, d) = LR · (1 - t/T) · exp(-d² / (2 r(t)²))
//! r(t)    = r0 - (r0 - 1) · t/T,   r0 = max(n, m) / 2
//! ```
//!
//! `d` is the Chebyshev lattice distance to the BMU; neurons further than
//! `3 r(t)` are skipped.

use crate::data::FeatureMatrix;
use crate::map::{MapId, MapModel};
use crate::train::{Result, TrainError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomParams {
    pub rows: usize,
    pub cols: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams { rows: 18, cols: 18, learning_rate: 0.3, epochs: 1000, seed: 0 }
    }
}

impl SomParams {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(TrainError::InvalidParam(format!("grid {}x{} must be at least 2x2", self.rows, self.cols)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(TrainError::InvalidParam(format!("learning rate {} not in (0, 1)", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidParam("epochs must be at least 1".into()));
        }
        Ok(())
    }

    fn initial_radius(&self) -> f64 {
        (self.rows.max(self.cols) as f64 / 2.0).max(1.0)
    }

    /// Neighbourhood radius at iteration `t`.
    pub fn radius(&self, t: usize) -> f64 {
        let r0 = self.initial_radius();
        r0 - (r0 - 1.0) * t as f64 / self.epochs as f64
    }

    /// Update rate at iteration `t` for a neuron at lattice distance `d`.
    pub fn rate(&self, t: usize, d: f64) -> f64 {
        let r = self.radius(t);
        self.learning_rate * (1.0 - t as f64 / self.epochs as f64) * (-d * d / (2.0 * r * r)).exp()
    }
}

/// Uniform random weights in `[0, 1]` on an `n × m` grid.
pub fn init_som(dim: usize, p: &SomParams, rng: &mut impl Rng) -> Result<MapModel> {
    Ok(MapModel::grid(MapId(0), p.rows, p.cols, dim, p.seed, |_| (0..dim).map(|_| rng.random::<f64>()).collect())?)
}

pub fn train_som(data: &FeatureMatrix, p: &SomParams) -> Result<MapModel> {
    p.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut map = init_som(data.dim(), p, &mut rng)?;
    for t in 0..p.epochs {
        let x = data.row(rng.random_range(0..data.n_samples()));
        let (bmu, _) = map.bmu_sq(x);
        let center = map.neuron(bmu).coord;
        let reach = 3.0 * p.radius(t);
        for n in map.neurons_mut() {
            let d = n.coord.chebyshev(center) as f64;
            if d > reach {
                continue;
            }
            let rate = p.rate(t, d);
            for (w, xi) in n.weights.iter_mut().zip(x) {
                *w -= rate * (*w - xi);
            }
        }
    }
    Ok(map)
}
