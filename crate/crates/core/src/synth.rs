//! Seeded synthetic labelled datasets for tests and demos.

use crate::data::FeatureMatrix;
use crate::label::{Label, LabelVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Two isotropic 2-D Gaussian classes whose centres are `separation`
/// standard deviations apart, clamped into `[0, 1]`. Labels alternate
/// benign, malicious, so classes are balanced.
pub fn two_blobs(n: usize, sigma: f64, separation: f64, seed: u64) -> (FeatureMatrix, LabelVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let half = 0.5 * separation * sigma;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (label, cx) = if i % 2 == 0 { (Label::Benign, 0.5 - half) } else { (Label::Malicious, 0.5 + half) };
        let x = (cx + noise.sample(&mut rng)).clamp(0.0, 1.0);
        let y = (0.5 + noise.sample(&mut rng)).clamp(0.0, 1.0);
        rows.push(vec![x, y]);
        labels.push(label);
    }
    (FeatureMatrix::from_rows(&rows).expect("rows are clamped"), LabelVector(labels))
}

/// Nested Gaussian clusters: `branching[0]` top clusters, each holding
/// `branching[1]` sub-clusters, and so on; spreads shrink by `shrink` per
/// level. Each cluster at depth `label_level` draws its label at random;
/// a share `label_noise` of samples then has its label flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub dim: usize,
    pub branching: Vec<usize>,
    pub spread: f64,
    pub shrink: f64,
    pub leaf_sigma: f64,
    pub label_level: usize,
    pub label_noise: f64,
}

impl Default for Hierarchy {
    fn default() -> Self {
        Hierarchy {
            dim: 4,
            branching: vec![4, 3, 3],
            spread: 0.2,
            shrink: 0.3,
            leaf_sigma: 0.01,
            label_level: 1,
            label_noise: 0.02,
        }
    }
}

impl Hierarchy {
    /// Leaf centres with the label of their ancestor at `label_level`.
    fn leaves(&self, rng: &mut impl Rng) -> Vec<(Vec<f64>, Label)> {
        let mut level: Vec<(Vec<f64>, Option<Label>)> = vec![(vec![0.5; self.dim], None)];
        let mut spread = self.spread;
        for (depth, &b) in self.branching.iter().enumerate() {
            let offset = Normal::new(0.0, spread).expect("spread is positive");
            let mut next = Vec::with_capacity(level.len() * b);
            for (c, label) in &level {
                for _ in 0..b {
                    let centre: Vec<f64> = c.iter().map(|v| (v + offset.sample(rng)).clamp(0.05, 0.95)).collect();
                    let label = if depth == self.label_level {
                        Some(if rng.random::<bool>() { Label::Malicious } else { Label::Benign })
                    } else {
                        *label
                    };
                    next.push((centre, label));
                }
            }
            level = next;
            spread *= self.shrink;
        }
        level.into_iter().map(|(c, l)| (c, l.unwrap_or(Label::Benign))).collect()
    }

    pub fn sample(&self, n: usize, seed: u64) -> (FeatureMatrix, LabelVector) {
        // Cluster layout depends only on the seed, not on n.
        let leaves = self.leaves(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        self.draw(&leaves, n, &mut rng)
    }

    /// Two independent draws from the same cluster layout.
    pub fn train_test(&self, n_train: usize, n_test: usize, seed: u64) -> ((FeatureMatrix, LabelVector), (FeatureMatrix, LabelVector)) {
        let leaves = self.leaves(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let train = self.draw(&leaves, n_train, &mut rng);
        let test = self.draw(&leaves, n_test, &mut rng);
        (train, test)
    }

    fn draw(&self, leaves: &[(Vec<f64>, Label)], n: usize, rng: &mut impl Rng) -> (FeatureMatrix, LabelVector) {
        let noise = Normal::new(0.0, self.leaf_sigma).expect("leaf sigma is positive");
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let (c, l) = &leaves[i % leaves.len()];
            rows.push(c.iter().map(|v| (v + noise.sample(rng)).clamp(0.0, 1.0)).collect());
            let flip = rng.random::<f64>() < self.label_noise;
            labels.push(match (flip, l) {
                (false, l) => *l,
                (true, Label::Benign) => Label::Malicious,
                (true, Label::Malicious) => Label::Benign,
            });
        }
        (FeatureMatrix::from_rows(&rows).expect("rows are clamped"), LabelVector(labels))
    }
}
