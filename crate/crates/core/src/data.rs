//! CSV ingestion, one-hot encoding, min-max normalization, feature selection
//! and stratified splitting.
//!
//! Normalization parameters are always fitted on a caller-chosen subset of
//! rows (the training split) and then applied to any other table with the
//! same columns. Values outside the fitted range are clamped into `[0, 1]`.

use crate::label::{Label, LabelVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("no label column declared or present")]
    MissingLabelColumn,
    #[error("more than one label column declared")]
    MultipleLabelColumns,
    #[error("column `{0}` is not declared in the schema")]
    UnknownColumn(String),
    #[error("column `{0}` is required but missing from the input")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: column `{column}` is not a finite number: `{value}`")]
    UnparseableNumeric { line: u64, column: String, value: String },
    #[error("line {line}: label `{value}` has no mapping")]
    UnmappedLabel { line: u64, value: String },
    #[error("the fit subset is empty")]
    EmptyFitSet,
    #[error("row index {0} is out of range")]
    RowOutOfRange(usize),
    #[error("unknown feature name `{0}`")]
    UnknownFeatureName(String),
    #[error("top_k = {k} is outside 1..={dim}")]
    TopKOutOfRange { k: usize, dim: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("class {0} has a single sample and cannot be stratified")]
    ClassWithSingleSample(Label),
    #[error("at least {needed} samples are required, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("label vector length {labels} does not match sample count {samples}")]
    LengthMismatch { samples: usize, labels: usize },
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Feature names used with NSL-KDD for the flat models.
pub const NSL_KDD_SELECTED: [&str; 7] = [
    "duration",
    "src_bytes",
    "dst_bytes",
    "count",
    "srv_count",
    "dst_host_count",
    "dst_host_srv_count",
];

/// Feature names used with CIC-IDS-2017 for the flat models.
pub const CIC_IDS_2017_SELECTED: [&str; 17] = [
    "Flow Bytes/s",
    "Flow Duration",
    "Flow IAT Max",
    "Fwd IAT Total",
    "Flow Packets/s",
    "Destination Port",
    "Bwd IAT Total",
    "Fwd Packets/s",
    "Flow IAT Min",
    "Packet Length Variance",
    "Flow IAT Mean",
    "Fwd IAT Max",
    "Idle Max",
    "Idle Mean",
    "Idle Min",
    "Flow IAT Std",
    "Bwd IAT Max",
];

/// The 41 NSL-KDD feature columns in file order.
pub const NSL_KDD_FEATURES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    /// Present in the file but not used (e.g. a difficulty score).
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec { name: name.into(), kind }
    }
}

/// Column-kind declaration plus the raw-label mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub label_mapping: BTreeMap<String, Label>,
    /// Kind given to header columns absent from `columns`. When unset such
    /// columns are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_kind: Option<ColumnKind>,
    /// Class for label strings absent from `label_mapping`. When unset they
    /// are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unmapped_label: Option<Label>,
    /// The file has no header row; `columns` gives the names in file order.
    #[serde(default)]
    pub headerless: bool,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, label_mapping: BTreeMap<String, Label>) -> Self {
        Schema { columns, label_mapping, default_kind: None, unmapped_label: None, headerless: false }
    }

    /// NSL-KDD layout: 41 features, the attack-name label and the difficulty
    /// column, without a header row. `normal` is benign and every other
    /// label malicious.
    pub fn nsl_kdd() -> Self {
        let mut columns: Vec<ColumnSpec> = NSL_KDD_FEATURES
            .iter()
            .map(|&n| {
                let kind = match n {
                    "protocol_type" | "service" | "flag" => ColumnKind::Categorical,
                    _ => ColumnKind::Numeric,
                };
                ColumnSpec::new(n, kind)
            })
            .collect();
        columns.push(ColumnSpec::new("label", ColumnKind::Label));
        columns.push(ColumnSpec::new("difficulty", ColumnKind::Ignore));
        let mut mapping = BTreeMap::new();
        mapping.insert("normal".to_string(), Label::Benign);
        Schema { columns, label_mapping: mapping, default_kind: None, unmapped_label: Some(Label::Malicious), headerless: true }
    }

    fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.kind).or(self.default_kind)
    }

    fn map_label(&self, raw: &str) -> Option<Label> {
        self.label_mapping.get(raw).copied().or(self.unmapped_label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

/// Parsed CSV table with resolved column kinds and mapped labels.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<RawValue>>,
    pub label_mapping: BTreeMap<String, Label>,
    labels: Option<Vec<Label>>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mapped labels; fails when the table was loaded without a label column.
    pub fn labels(&self) -> Result<LabelVector> {
        self.labels.clone().map(LabelVector).ok_or(DataError::MissingLabelColumn)
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// Reads a labelled CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, true)
}

/// Reads a CSV file in which the label column may be absent.
pub fn load_csv_unlabeled(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, false)
}

/// Parses CSV text from any reader. With `require_label` the header must
/// contain exactly one label column.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, require_label: bool) -> Result<RawDataset> {
    let declared_labels = schema.columns.iter().filter(|c| c.kind == ColumnKind::Label).count();
    if declared_labels > 1 {
        return Err(DataError::MultipleLabelColumns);
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(!schema.headerless).flexible(true).from_reader(reader);
    let header: Vec<String> = if schema.headerless {
        schema.columns.iter().map(|c| c.name.clone()).collect()
    } else {
        rdr.headers()?.iter().map(|h| h.trim().to_string()).collect()
    };

    let mut columns = Vec::with_capacity(header.len());
    for name in &header {
        let kind = schema.kind_of(name).ok_or_else(|| DataError::UnknownColumn(name.clone()))?;
        columns.push(ColumnSpec::new(name.clone(), kind));
    }
    let label_positions: Vec<usize> =
        columns.iter().enumerate().filter(|(_, c)| c.kind == ColumnKind::Label).map(|(i, _)| i).collect();
    if label_positions.len() > 1 {
        return Err(DataError::MultipleLabelColumns);
    }
    let label_col = label_positions.first().copied();
    if require_label && label_col.is_none() {
        return Err(DataError::MissingLabelColumn);
    }

    let mut rows = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != columns.len() {
            return Err(DataError::RaggedRow { line, expected: columns.len(), found: record.len() });
        }
        let mut row = Vec::with_capacity(columns.len());
        for (cell, col) in record.iter().zip(&columns) {
            let cell = cell.trim();
            let value = match col.kind {
                ColumnKind::Numeric => match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => RawValue::Number(v),
                    _ => {
                        return Err(DataError::UnparseableNumeric {
                            line,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        })
                    }
                },
                _ => RawValue::Text(cell.to_string()),
            };
            row.push(value);
        }
        if let (Some(li), Some(labels)) = (label_col, labels.as_mut()) {
            let raw = record.get(li).unwrap_or_default().trim();
            let label = schema
                .map_label(raw)
                .ok_or_else(|| DataError::UnmappedLabel { line, value: raw.to_string() })?;
            labels.push(label);
        }
        rows.push(row);
    }
    Ok(RawDataset { columns, rows, label_mapping: schema.label_mapping.clone(), labels })
}

/// Dense sample-by-feature matrix with every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_samples: usize,
    dim: usize,
    feature_names: Vec<String>,
    /// Raw-scale (min, max) the column was scaled with.
    norm_params: Vec<(f64, f64)>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data, validating range, shape and names.
    pub fn new(data: Vec<f64>, dim: usize, feature_names: Vec<String>, norm_params: Vec<(f64, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(DataError::InvalidMatrix("dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(DataError::InvalidMatrix(format!("{} values do not fill rows of width {dim}", data.len())));
        }
        if feature_names.len() != dim || norm_params.len() != dim {
            return Err(DataError::InvalidMatrix("feature names / params length differs from dimension".into()));
        }
        let unique: BTreeSet<&String> = feature_names.iter().collect();
        if unique.len() != dim {
            return Err(DataError::InvalidMatrix("feature names are not unique".into()));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::InvalidMatrix(format!("value {v} outside [0, 1]")));
        }
        Ok(FeatureMatrix { n_samples: data.len() / dim, data, dim, feature_names, norm_params })
    }

    /// Builds a matrix from rows already in `[0, 1]`, named `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let names = (0..dim).map(|i| format!("f{i}")).collect();
        Self::from_rows_named(rows, names)
    }

    pub fn from_rows_named(rows: &[Vec<f64>], feature_names: Vec<String>) -> Result<Self> {
        let dim = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(DataError::InvalidMatrix(format!("row of width {} in a {dim}-feature matrix", bad.len())));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(data, dim, feature_names, vec![(0.0, 1.0); dim])
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn norm_params(&self) -> &[(f64, f64)] {
        &self.norm_params
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        self.rows().map(|r| r[f]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Matrix restricted to the given rows, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n_samples: indices.len(),
            data,
            dim: self.dim,
            feature_names: self.feature_names.clone(),
            norm_params: self.norm_params.clone(),
        }
    }

    /// Matrix restricted to the given columns, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_samples * cols.len());
        for row in self.rows() {
            data.extend(cols.iter().map(|&c| row[c]));
        }
        FeatureMatrix {
            n_samples: self.n_samples,
            data,
            dim: cols.len(),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            norm_params: cols.iter().map(|&c| self.norm_params[c]).collect(),
        }
    }

    /// Re-fits min-max scaling over every row and applies it. On a matrix
    /// produced by fitting over all of its rows this is the identity.
    pub fn renormalize(&self) -> FeatureMatrix {
        let params: Vec<(f64, f64)> = (0..self.dim).map(|f| min_max(self.rows().map(|r| r[f]))).collect();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let (lo, hi) = params[k % self.dim];
                scale(v, lo, hi)
            })
            .collect();
        FeatureMatrix {
            data,
            n_samples: self.n_samples,
            dim: self.dim,
            feature_names: self.feature_names.clone(),
            norm_params: self.norm_params.clone(),
        }
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Min-max scale with clamping; a constant column maps to 0.
fn scale(v: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        return 0.0;
    }
    ((v - min) / (max - min)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
enum ColumnEncoding {
    Numeric { name: String, min: f64, max: f64 },
    Categorical { name: String, categories: Vec<String> },
}

/// Fitted encoder: one-hot categories and min-max ranges learned from a
/// subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    encodings: Vec<ColumnEncoding>,
    feature_names: Vec<String>,
}

impl Preprocessor {
    /// Learns encodings from the rows listed in `fit_on`.
    pub fn fit(raw: &RawDataset, fit_on: &[usize]) -> Result<Self> {
        if fit_on.is_empty() {
            return Err(DataError::EmptyFitSet);
        }
        if let Some(&bad) = fit_on.iter().find(|&&i| i >= raw.len()) {
            return Err(DataError::RowOutOfRange(bad));
        }
        let mut encodings = Vec::new();
        let mut feature_names = Vec::new();
        for (c, spec) in raw.columns.iter().enumerate() {
            match spec.kind {
                ColumnKind::Numeric => {
                    let (min, max) = min_max(fit_on.iter().map(|&i| match &raw.rows[i][c] {
                        RawValue::Number(v) => *v,
                        RawValue::Text(_) => unreachable!("numeric columns hold numbers"),
                    }));
                    feature_names.push(spec.name.clone());
                    encodings.push(ColumnEncoding::Numeric { name: spec.name.clone(), min, max });
                }
                ColumnKind::Categorical => {
                    let categories: BTreeSet<String> = fit_on.iter().map(|&i| cell_text(&raw.rows[i][c])).collect();
                    let categories: Vec<String> = categories.into_iter().collect();
                    feature_names.extend(categories.iter().map(|cat| format!("{}={}", spec.name, cat)));
                    encodings.push(ColumnEncoding::Categorical { name: spec.name.clone(), categories });
                }
                ColumnKind::Label | ColumnKind::Ignore => {}
            }
        }
        if feature_names.is_empty() {
            return Err(DataError::InvalidMatrix("schema declares no feature columns".into()));
        }
        Ok(Preprocessor { encodings, feature_names })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Encodes every row of `raw`. Columns are matched by name; labels are
    /// never read.
    pub fn transform_features(&self, raw: &RawDataset) -> Result<FeatureMatrix> {
        let mut positions = Vec::with_capacity(self.encodings.len());
        for enc in &self.encodings {
            let name = match enc {
                ColumnEncoding::Numeric { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
            };
            positions.push(raw.column_index(name).ok_or_else(|| DataError::MissingColumn(name.clone()))?);
        }
        let lookups: Vec<Option<HashMap<&str, usize>>> = self
            .encodings
            .iter()
            .map(|e| match e {
                ColumnEncoding::Categorical { categories, .. } => {
                    Some(categories.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect())
                }
                ColumnEncoding::Numeric { .. } => None,
            })
            .collect();

        let dim = self.dim();
        let mut data = Vec::with_capacity(raw.len() * dim);
        for row in &raw.rows {
            for ((enc, &pos), lookup) in self.encodings.iter().zip(&positions).zip(&lookups) {
                match enc {
                    ColumnEncoding::Numeric { name, min, max } => {
                        let v = match &row[pos] {
                            RawValue::Number(v) => *v,
                            RawValue::Text(t) => t.parse::<f64>().map_err(|_| DataError::UnparseableNumeric {
                                line: 0,
                                column: name.clone(),
                                value: t.clone(),
                            })?,
                        };
                        data.push(scale(v, *min, *max));
                    }
                    ColumnEncoding::Categorical { categories, .. } => {
                        let hit = lookup.as_ref().and_then(|m| m.get(cell_text(&row[pos]).as_str()).copied());
                        data.extend((0..categories.len()).map(|k| if Some(k) == hit { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
        let norm_params = self
            .encodings
            .iter()
            .flat_map(|e| match e {
                ColumnEncoding::Numeric { min, max, .. } => vec![(*min, *max)],
                ColumnEncoding::Categorical { categories, .. } => vec![(0.0, 1.0); categories.len()],
            })
            .collect();
        FeatureMatrix::new(data, dim, self.feature_names.clone(), norm_params)
    }

    pub fn transform(&self, raw: &RawDataset) -> Result<(FeatureMatrix, LabelVector)> {
        Ok((self.transform_features(raw)?, raw.labels()?))
    }
}

fn cell_text(v: &RawValue) -> String {
    match v {
        RawValue::Text(t) => t.clone(),
        RawValue::Number(n) => n.to_string(),
    }
}

/// Fits on `fit_on` and encodes the whole table.
pub fn encode_and_normalize(raw: &RawDataset, fit_on: &[usize]) -> Result<(FeatureMatrix, LabelVector)> {
    Preprocessor::fit(raw, fit_on)?.transform(raw)
}

/// Per-feature sample variance divided by the largest variance.
///
/// Zero-variance features score 0; if every feature is constant all scores
/// are 0.
pub fn feature_significance(m: &FeatureMatrix) -> Result<Vec<f64>> {
    if m.n_samples() < 2 {
        return Err(DataError::TooFewSamples { needed: 2, got: m.n_samples() });
    }
    let n = m.n_samples() as f64;
    let variances: Vec<f64> = (0..m.dim())
        .map(|f| {
            let first = m.row(0)[f];
            if m.rows().all(|r| r[f] == first) {
                return 0.0;
            }
            let mean = m.rows().map(|r| r[f]).sum::<f64>() / n;
            m.rows().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let max = variances.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(vec![0.0; m.dim()]);
    }
    Ok(variances.iter().map(|v| (v / max).clamp(0.0, 1.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FeatureSelection {
    #[default]
    All,
    Names { names: Vec<String> },
    TopK { k: usize },
}

/// Resolves a selection to column indices of `m`. Explicit names keep the
/// requested order; `TopK` keeps the k most significant columns in their
/// original order (significance ties favour the earlier column).
pub fn resolve_selection(m: &FeatureMatrix, sel: &FeatureSelection) -> Result<Vec<usize>> {
    match sel {
        FeatureSelection::All => Ok((0..m.dim()).collect()),
        FeatureSelection::Names { names } => names
            .iter()
            .map(|n| {
                m.feature_names()
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| DataError::UnknownFeatureName(n.clone()))
            })
            .collect(),
        FeatureSelection::TopK { k } => {
            if *k == 0 || *k > m.dim() {
                return Err(DataError::TopKOutOfRange { k: *k, dim: m.dim() });
            }
            let sig = feature_significance(m)?;
            let mut order: Vec<usize> = (0..m.dim()).collect();
            order.sort_by(|&a, &b| sig[b].total_cmp(&sig[a]).then(a.cmp(&b)));
            let mut keep: Vec<usize> = order.into_iter().take(*k).collect();
            keep.sort_unstable();
            Ok(keep)
        }
    }
}

pub fn select_features(m: &FeatureMatrix, sel: &FeatureSelection) -> Result<FeatureMatrix> {
    let cols = resolve_selection(m, sel)?;
    Ok(m.select_columns(&cols))
}

/// Per-class shuffled split. Each class contributes `round(n_c * test_fraction)`
/// samples to the test side. Returned indices are ascending.
pub fn stratified_split_indices(labels: &LabelVector, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Benign, Label::Malicious] {
        let mut idx: Vec<usize> = labels.iter().enumerate().filter(|(_, l)| **l == class).map(|(i, _)| i).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() == 1 {
            return Err(DataError::ClassWithSingleSample(class));
        }
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// A feature matrix paired with its labels.
pub type LabeledSplit = (FeatureMatrix, LabelVector);

pub fn stratified_split(
    m: &FeatureMatrix,
    labels: &LabelVector,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledSplit, LabeledSplit)> {
    if labels.len() != m.n_samples() {
        return Err(DataError::LengthMismatch { samples: m.n_samples(), labels: labels.len() });
    }
    let (train, test) = stratified_split_indices(labels, test_fraction, seed)?;
    Ok(((m.subset(&train), labels.select(&train)), (m.subset(&test), labels.select(&test))))
}
