//! Competitive-learning intrusion detection.
//!
//! Trains self-organizing maps (fixed grid, growing, and growing
//! hierarchical) on normalized flow features, prunes hierarchies with a
//! pessimistic error bound, predicts benign/malicious labels and mines the
//! trained maps for statistical and visual explanations.

pub mod data;
pub mod eval;
pub mod explain;
pub mod ghsom;
pub mod gsom;
pub mod label;
pub mod map;
pub mod model;
pub mod prune;
pub mod search;
pub mod som;
pub mod stats;
pub mod synth;
pub mod train;

pub use data::{FeatureMatrix, FeatureSelection, Preprocessor, RawDataset, Schema};
pub use label::{Label, LabelVector};
pub use map::{Coord, MapId, MapModel, Neuron, QualityReport};
