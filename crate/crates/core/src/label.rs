//! Binary traffic class labels.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Binary class of a flow record. Malicious is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Benign => 0,
            Label::Malicious => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Benign),
            1 => Some(Label::Malicious),
            _ => None,
        }
    }

    /// Majority vote over class counts. A tie goes to `Malicious`.
    pub fn majority(benign: usize, malicious: usize) -> Self {
        if malicious >= benign {
            Label::Malicious
        } else {
            Label::Benign
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Benign => write!(f, "benign"),
            Label::Malicious => write!(f, "malicious"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

/// Ground-truth or predicted labels, one per sample.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(pub Vec<Label>);

impl LabelVector {
    pub fn new(labels: Vec<Label>) -> Self {
        LabelVector(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Label> {
        self.0.iter()
    }

    /// Labels at the given positions, in that order.
    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector(indices.iter().map(|&i| self.0[i]).collect())
    }

    /// (benign, malicious) counts.
    pub fn counts(&self) -> (usize, usize) {
        let malicious = self.0.iter().filter(|l| **l == Label::Malicious).count();
        (self.0.len() - malicious, malicious)
    }
}

impl From<Vec<Label>> for LabelVector {
    fn from(v: Vec<Label>) -> Self {
        LabelVector(v)
    }
}

impl std::ops::Index<usize> for LabelVector {
    type Output = Label;
    fn index(&self, i: usize) -> &Label {
        &self.0[i]
    }
}
