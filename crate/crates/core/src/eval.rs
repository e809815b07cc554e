//! Binary classification metrics (positive class = malicious) and
//! prediction timing.

use crate::data::FeatureMatrix;
use crate::ghsom::GhsomTree;
use crate::label::{Label, LabelVector};
use crate::map::{MapError, MapModel};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{truth} truth labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("benchmark needs at least one sample and one repetition")]
    EmptyBenchmark,
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(truth: &LabelVector, pred: &LabelVector) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    let mut c = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(pred.iter()) {
        match (t, p) {
            (Label::Malicious, Label::Malicious) => c.tp += 1,
            (Label::Benign, Label::Malicious) => c.fp += 1,
            (Label::Benign, Label::Benign) => c.tn += 1,
            (Label::Malicious, Label::Benign) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Ratios whose denominator was zero; each such ratio is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Undefined {
    pub accuracy: bool,
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub fpr: bool,
    pub fnr: bool,
}

impl Undefined {
    pub fn any(&self) -> bool {
        self.accuracy || self.precision || self.recall || self.f1 || self.fpr || self.fnr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub undefined: Undefined,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `f1` is computed as `2tp / (2tp + fp + fn)`, algebraically the harmonic
/// mean of precision and recall, and 0 whenever `tp = 0`.
pub fn metrics(c: &ConfusionMatrix) -> Metrics {
    let mut u = Undefined::default();
    let accuracy = ratio(c.tp + c.tn, c.total(), &mut u.accuracy);
    let precision = ratio(c.tp, c.tp + c.fp, &mut u.precision);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut u.recall);
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, &mut u.f1);
    let fpr = ratio(c.fp, c.fp + c.tn, &mut u.fpr);
    let fnr = ratio(c.fn_, c.fn_ + c.tp, &mut u.fnr);
    Metrics { accuracy, precision, recall, f1, fpr, fnr, undefined: u }
}

pub const CSV_HEADER: [&str; 9] = [
    "accuracy",
    "precision",
    "recall",
    "f1",
    "fpr",
    "fnr",
    "network_size",
    "train_time_s",
    "predict_time_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub network_size: usize,
    pub train_time_s: f64,
    /// Mean per-sample prediction time.
    pub predict_time_ms: f64,
    pub confusion: ConfusionMatrix,
    pub undefined: Undefined,
}

impl EvalReport {
    pub fn new(c: ConfusionMatrix, network_size: usize, train_time_s: f64, predict_time_ms: f64) -> Self {
        let m = metrics(&c);
        EvalReport {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fpr: m.fpr,
            fnr: m.fnr,
            network_size,
            train_time_s,
            predict_time_ms,
            confusion: c,
            undefined: m.undefined,
        }
    }

    /// Values in [`CSV_HEADER`] order.
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.accuracy.to_string(),
            self.precision.to_string(),
            self.recall.to_string(),
            self.f1.to_string(),
            self.fpr.to_string(),
            self.fnr.to_string(),
            self.network_size.to_string(),
            self.train_time_s.to_string(),
            self.predict_time_ms.to_string(),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        w.write_record(self.csv_row()).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// Anything that labels one sample at a time.
pub trait Classifier {
    fn classify(&self, sample: &[f64]) -> Result<Label, MapError>;

    /// Maps in the model; 1 for flat maps.
    fn network_size(&self) -> usize {
        1
    }

    fn classify_all(&self, data: &FeatureMatrix) -> Result<LabelVector, MapError> {
        data.rows().map(|r| self.classify(r)).collect::<Result<Vec<_>, _>>().map(LabelVector)
    }
}

impl Classifier for MapModel {
    fn classify(&self, sample: &[f64]) -> Result<Label, MapError> {
        self.predict_flat(sample)
    }
}

impl Classifier for GhsomTree {
    fn classify(&self, sample: &[f64]) -> Result<Label, MapError> {
        Ok(self.predict(sample)?.label)
    }

    fn network_size(&self) -> usize {
        GhsomTree::network_size(self)
    }
}

pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    data: &FeatureMatrix,
    truth: &LabelVector,
    train_time_s: f64,
) -> Result<EvalReport, EvalError> {
    let start = Instant::now();
    let pred = model.classify_all(data)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let c = confusion(truth, &pred)?;
    let per_sample = if data.n_samples() == 0 { 0.0 } else { elapsed_ms / data.n_samples() as f64 };
    Ok(EvalReport::new(c, model.network_size(), train_time_s, per_sample))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub repetitions: usize,
    pub samples: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
}

/// Per-sample wall-clock prediction time over `repetitions` passes of the
/// whole batch: the mean and the median of per-sample latencies.
pub fn benchmark<C: Classifier + ?Sized>(model: &C, data: &FeatureMatrix, repetitions: usize) -> Result<Timing, EvalError> {
    if repetitions == 0 || data.n_samples() == 0 {
        return Err(EvalError::EmptyBenchmark);
    }
    let mut times = Vec::with_capacity(repetitions * data.n_samples());
    for _ in 0..repetitions {
        for row in data.rows() {
            let t = Instant::now();
            std::hint::black_box(model.classify(std::hint::black_box(row))?);
            times.push(t.elapsed().as_secs_f64() * 1e3);
        }
    }
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    let median_ms = if times.len() % 2 == 1 { times[mid] } else { 0.5 * (times[mid - 1] + times[mid]) };
    Ok(Timing { repetitions, samples: data.n_samples(), mean_ms, median_ms })
}
