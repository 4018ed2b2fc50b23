//! Tabular data handling: CSV loading, binarization, bias column, seeded
//! train/test splits, protected groups and the majority baseline.
//!
//! Every feature cell of a [`Dataset`] is 0 or 1 and every label is -1 or +1.
//! Raw CSV columns are binarized as follows:
//!
//! * a numeric column whose values are all 0 or 1 is kept as is;
//! * any other numeric column becomes threshold indicators `col>q` for the
//!   25/50/75% empirical quantiles (nearest rank), dropping duplicate and
//!   constant indicators;
//! * a non-numeric column becomes one indicator `col=level` per level, in
//!   lexicographic level order.

use std::collections::BTreeSet;
use std::path::Path;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name given to the all-ones column added by [`append_bias`].
pub const BIAS_NAME: &str = "__bias__";

const QUANTILES: [(u32, u32); 3] = [(1, 4), (1, 2), (3, 4)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<u8>>,
    labels: Vec<i8>,
    feature_names: Vec<String>,
    bias_appended: bool,
}

impl Dataset {
    /// Builds a dataset from already-binary rows.
    pub fn new(features: Vec<Vec<u8>>, labels: Vec<i8>, feature_names: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Argument("dataset needs at least one example".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: labels.len(), actual: features.len() });
        }
        let m = feature_names.len();
        for row in &features {
            if row.len() != m {
                return Err(Error::LengthMismatch { expected: m, actual: row.len() });
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::Argument("feature cells must be 0 or 1".into()));
            }
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::Argument("labels must be -1 or +1".into()));
        }
        let unique: BTreeSet<&String> = feature_names.iter().collect();
        if unique.len() != m {
            return Err(Error::Argument("feature names must be unique".into()));
        }
        let bias_appended = feature_names.last().is_some_and(|n| n == BIAS_NAME)
            && features.iter().all(|r| r[m - 1] == 1);
        Ok(Dataset { features, labels, feature_names, bias_appended })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn m(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.features[i]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.features
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn bias_appended(&self) -> bool {
        self.bias_appended
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Number of examples labelled +1.
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            bias_appended: self.bias_appended,
        }
    }

    /// Copy of the dataset with the bias column removed, if present.
    pub fn without_bias(&self) -> Dataset {
        if !self.bias_appended {
            return self.clone();
        }
        let m = self.m() - 1;
        Dataset {
            features: self.features.iter().map(|r| r[..m].to_vec()).collect(),
            labels: self.labels.clone(),
            feature_names: self.feature_names[..m].to_vec(),
            bias_appended: false,
        }
    }
}

/// Index sets of the two protected groups and their positive subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub g1: Vec<usize>,
    pub g2: Vec<usize>,
    pub g1_pos: Vec<usize>,
    pub g2_pos: Vec<usize>,
}

impl GroupSpec {
    /// Builds a spec from explicit member lists; positive subsets follow `labels`.
    pub fn new(mut g1: Vec<usize>, mut g2: Vec<usize>, labels: &[i8]) -> Result<Self> {
        g1.sort_unstable();
        g1.dedup();
        g2.sort_unstable();
        g2.dedup();
        if g1.is_empty() || g2.is_empty() {
            return Err(Error::Group("both protected groups must be nonempty".into()));
        }
        if let Some(&i) = g1.iter().chain(&g2).find(|&&i| i >= labels.len()) {
            return Err(Error::Group(format!("example index {i} out of range")));
        }
        if g1.iter().any(|i| g2.binary_search(i).is_ok()) {
            return Err(Error::Group("protected groups overlap".into()));
        }
        let pos = |g: &[usize]| g.iter().copied().filter(|&i| labels[i] == 1).collect();
        Ok(GroupSpec { g1_pos: pos(&g1), g2_pos: pos(&g2), g1, g2 })
    }

    /// The same partition with the roles of the two groups exchanged.
    pub fn swapped(&self) -> GroupSpec {
        GroupSpec {
            g1: self.g2.clone(),
            g2: self.g1.clone(),
            g1_pos: self.g2_pos.clone(),
            g2_pos: self.g1_pos.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub seed: u64,
}

/// SplitMix64 generator (Steele, Lea, Flood). Used for every shuffle so that
/// splits are reproducible bit-for-bit from the seed.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound` (modulo reduction; bias is negligible for
    /// the small bounds used here).
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    /// Uniform float in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Fisher-Yates shuffle: for `i` from the end, swap `i` with `below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })?;
    parse_csv(&text, label_column, positive_label)
        .map_err(|reason| Error::Load { path: path.to_path_buf(), reason })
}

/// Parses CSV text (header row first) into a binarized dataset.
pub fn parse_csv(text: &str, label_column: &str, positive_label: &str) -> std::result::Result<Dataset, String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err("empty file".into());
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| format!("label column `{label_column}` not found"))?;
    let mut labels = Vec::new();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("row {}: {e}", line + 2))?;
        let mut cells: Vec<String> = record.iter().map(str::to_string).collect();
        let label = cells.remove(label_idx);
        labels.push(if label == positive_label { 1 } else { -1 });
        raw.push(cells);
    }
    if labels.is_empty() {
        return Err("no data rows".into());
    }
    let mut names = headers;
    names.remove(label_idx);
    let (feature_names, features) = binarize(&names, &raw)?;
    Dataset::new(features, labels, feature_names).map_err(|e| e.to_string())
}

/// Binarizes raw string columns.
///
/// Returns the new column names and the row-major 0/1 matrix.
pub fn binarize(names: &[String], rows: &[Vec<String>]) -> std::result::Result<(Vec<String>, Vec<Vec<u8>>), String> {
    let n = rows.len();
    let mut out_names = Vec::new();
    let mut out_cols: Vec<Vec<u8>> = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let cells: Vec<&str> = rows.iter().map(|r| r[c].as_str()).collect();
        if let Some(i) = cells.iter().position(|s| s.is_empty()) {
            return Err(format!("empty cell in column `{name}` at data row {}", i + 1));
        }
        let numeric = cells.first().is_some_and(|s| s.parse::<f64>().is_ok());
        if !numeric {
            let levels: BTreeSet<&str> = cells.iter().copied().collect();
            for level in levels {
                out_names.push(format!("{name}={level}"));
                out_cols.push(cells.iter().map(|&s| u8::from(s == level)).collect());
            }
            continue;
        }
        let mut values = Vec::with_capacity(n);
        for (i, s) in cells.iter().enumerate() {
            let v: f64 = s
                .parse()
                .map_err(|_| format!("non-parsable cell `{s}` in numeric column `{name}` at data row {}", i + 1))?;
            if !v.is_finite() {
                return Err(format!("non-finite cell `{s}` in column `{name}`"));
            }
            values.push(v);
        }
        if values.iter().all(|&v| v == 0.0 || v == 1.0) {
            out_names.push(name.clone());
            out_cols.push(values.iter().map(|&v| v as u8).collect());
            continue;
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let mut seen: Vec<Vec<u8>> = Vec::new();
        for (num, den) in QUANTILES {
            let rank = (n as u64 * num as u64).div_ceil(den as u64).max(1) as usize;
            let q = sorted[rank - 1];
            let col: Vec<u8> = values.iter().map(|&v| u8::from(v > q)).collect();
            let constant = col.iter().all(|&b| b == col[0]);
            if constant || seen.contains(&col) {
                continue;
            }
            seen.push(col.clone());
            out_names.push(format!("{name}>{q}"));
            out_cols.push(col);
        }
    }
    let matrix = (0..n).map(|i| out_cols.iter().map(|col| col[i]).collect()).collect();
    Ok((out_names, matrix))
}

/// Appends the all-ones `__bias__` column.
pub fn append_bias(ds: &Dataset) -> Result<Dataset> {
    if ds.bias_appended {
        return Err(Error::InvalidState("bias column already appended".into()));
    }
    let mut out = ds.clone();
    for row in &mut out.features {
        row.push(1);
    }
    out.feature_names.push(BIAS_NAME.to_string());
    out.bias_appended = true;
    Ok(out)
}

/// Seeded shuffle, then the first `train_size` rows become the training part.
pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    if spec.train_size == 0 || spec.train_size >= ds.n() {
        return Err(Error::Argument(format!(
            "train_size must be in 1..{} (got {})",
            ds.n(),
            spec.train_size
        )));
    }
    let mut order: Vec<usize> = (0..ds.n()).collect();
    SplitMix64::new(spec.seed).shuffle(&mut order);
    let (train, test) = order.split_at(spec.train_size);
    Ok((ds.subset(train), ds.subset(test)))
}

/// `g1` holds the rows where `feature_name` is 1, `g2` the rest.
pub fn groups_from_feature(ds: &Dataset, feature_name: &str) -> Result<GroupSpec> {
    let j = ds
        .feature_index(feature_name)
        .ok_or_else(|| Error::Group(format!("unknown feature `{feature_name}`")))?;
    let (g1, g2): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&i| ds.row(i)[j] == 1);
    if g1.is_empty() || g2.is_empty() {
        return Err(Error::Group(format!("feature `{feature_name}` leaves a protected group empty")));
    }
    GroupSpec::new(g1, g2, ds.labels())
}

/// Loss of the constant predictor of the most frequent label.
pub fn majority_loss(ds: &Dataset) -> Rational64 {
    let pos = ds.positives();
    let minority = pos.min(ds.n() - pos);
    Rational64::new(minority as i64, ds.n() as i64)
}
