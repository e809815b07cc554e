//! Seeded random search over declared parameter ranges.
//!
//! The whole parameter sequence is drawn up front from the search seed, so
//! trial `i` sees the same parameters however trials are scheduled. Trials
//! run in parallel; each also gets its own derived seed.

use crate::train::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search budget must be at least 1")]
    ZeroBudget,
    #[error("search space is empty")]
    EmptySpace,
    #[error("invalid range for {name}: {reason}")]
    InvalidRange { name: String, reason: String },
    #[error("writing trial log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "snake_case")]
pub enum ParamRange {
    Linear { low: f64, high: f64 },
    Log { low: f64, high: f64 },
    /// Inclusive integer interval.
    Integer { low: i64, high: i64 },
    Discrete { values: Vec<f64> },
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<(), SearchError> {
        let bad = |reason: &str| Err(SearchError::InvalidRange { name: name.to_string(), reason: reason.to_string() });
        match *self {
            ParamRange::Linear { low, high } if !(low.is_finite() && high.is_finite() && low <= high) => {
                bad("need finite low <= high")
            }
            ParamRange::Log { low, high } if !(low > 0.0 && high.is_finite() && low <= high) => bad("need 0 < low <= high"),
            ParamRange::Integer { low, high } if low > high => bad("need low <= high"),
            ParamRange::Discrete { ref values } if values.is_empty() || values.iter().any(|v| !v.is_finite()) => {
                bad("need at least one finite value")
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            ParamRange::Linear { low, high } | ParamRange::Log { low, high } => (*low..=*high).contains(&v),
            ParamRange::Integer { low, high } => v.fract() == 0.0 && (*low as f64..=*high as f64).contains(&v),
            ParamRange::Discrete { values } => values.contains(&v),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ParamRange::Linear { low, high } => (low + rng.random::<f64>() * (high - low)).clamp(*low, *high),
            ParamRange::Log { low, high } => {
                let (a, b) = (low.ln(), high.ln());
                (a + rng.random::<f64>() * (b - a)).exp().clamp(*low, *high)
            }
            ParamRange::Integer { low, high } => rng.random_range(*low..=*high) as f64,
            ParamRange::Discrete { values } => values[rng.random_range(0..values.len())],
        }
    }
}

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace(pub BTreeMap<String, ParamRange>);

impl SearchSpace {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.0.is_empty() {
            return Err(SearchError::EmptySpace);
        }
        self.0.iter().try_for_each(|(k, r)| r.validate(k))
    }

    pub fn contains(&self, p: &Params) -> bool {
        p.len() == self.0.len() && self.0.iter().all(|(k, r)| p.get(k).is_some_and(|v| r.contains(*v)))
    }

    /// The first `budget` parameter sets for `seed`.
    pub fn draw(&self, budget: usize, seed: u64) -> Result<Vec<Params>, SearchError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..budget).map(|_| self.0.iter().map(|(k, r)| (k.clone(), r.sample(&mut rng))).collect()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub params: Params,
    /// Objective value (higher is better); `None` if the objective failed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Highest objective, earliest trial on ties; `None` if every trial failed.
    pub best: Option<Trial>,
    pub trials: Vec<Trial>,
}

/// Runs `budget` trials of `objective(params, trial_seed)`.
///
/// A failing trial is recorded with its error and still consumes budget.
pub fn random_search<F>(space: &SearchSpace, budget: usize, seed: u64, objective: F) -> Result<SearchOutcome, SearchError>
where
    F: Fn(&Params, u64) -> Result<f64, String> + Sync,
{
    if budget == 0 {
        return Err(SearchError::ZeroBudget);
    }
    let draws = space.draw(budget, seed)?;
    let trials: Vec<Trial> = draws
        .into_par_iter()
        .enumerate()
        .map(|(index, params)| {
            let trial_seed = derive_seed(seed, index as u64);
            let (objective, error) = match objective(&params, trial_seed) {
                Ok(v) if v.is_nan() => (None, Some("objective returned NaN".to_string())),
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e)),
            };
            Trial { index, seed: trial_seed, params, objective, error }
        })
        .collect();
    let mut best: Option<&Trial> = None;
    for t in &trials {
        if let Some(v) = t.objective {
            if best.and_then(|b| b.objective).is_none_or(|b| v > b) {
                best = Some(t);
            }
        }
    }
    Ok(SearchOutcome { best: best.cloned(), trials })
}

/// Appends one JSON object per trial.
pub fn write_trial_log(trials: &[Trial], mut out: impl Write) -> Result<(), SearchError> {
    for t in trials {
        serde_json::to_writer(&mut out, t).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
