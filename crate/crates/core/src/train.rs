//! Errors and seeding helpers shared by the trainers.

use crate::map::MapError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training data is empty")]
    EmptyData,
    #[error("data has {got} features, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{labels} labels for {samples} samples")]
    LengthMismatch { samples: usize, labels: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a child derived from its parent's seed and a child key.
pub fn derive_seed(parent: u64, key: u64) -> u64 {
    mix64(parent ^ mix64(key.wrapping_add(1)))
}
