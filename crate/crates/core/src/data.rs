//! Datasets, linear classifiers, and exact risk bookkeeping.
//!
//! Every feature vector carries the intercept in slot 0, so a dataset with
//! `d` features stores vectors of length `d + 1`. Example weights are integer
//! duplication counts; all rates are kept as exact `mistakes / n` ratios.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-l1 normalization of classifier coefficients.
pub const L1_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(value: i64) -> Option<Self> {
        match value {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.sign() as f64
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    features: Vec<f64>,
    label: Label,
    group: Option<String>,
    weight: u64,
}

impl Example {
    /// Builds an example from a full feature vector whose first entry must be
    /// the intercept `1.0`.
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        Self::validate(&features, 1, 0)?;
        Ok(Example {
            features,
            label,
            group: None,
            weight: 1,
        })
    }

    /// Builds an example from raw features, prepending the intercept.
    pub fn from_raw(raw: &[f64], label: Label) -> Self {
        let mut features = Vec::with_capacity(raw.len() + 1);
        features.push(1.0);
        features.extend_from_slice(raw);
        Example {
            features,
            label,
            group: None,
            weight: 1,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn with_weight(mut self, weight: u64) -> Result<Self> {
        if weight == 0 {
            return Err(Error::InvalidExample {
                index: 0,
                reason: "weight must be at least 1".into(),
            });
        }
        self.weight = weight;
        Ok(self)
    }

    fn validate(features: &[f64], weight: u64, index: usize) -> Result<()> {
        let reason = if features.first() != Some(&1.0) {
            Some("features[0] must be the intercept 1.0".to_string())
        } else if features.iter().any(|v| !v.is_finite()) {
            Some("features must be finite".to_string())
        } else if weight == 0 {
            Some("weight must be at least 1".to_string())
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidExample { index, reason }),
            None => Ok(()),
        }
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn group(&self) -> Option<&str> {
        self.group.as_deref()
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }
}

/// Bitwise key for exact feature-vector comparisons (`-0.0` folded into `0.0`).
pub(crate) fn feature_key(features: &[f64]) -> Vec<u64> {
    features
        .iter()
        .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
    conflict_pairs: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let first = examples.first().ok_or(Error::EmptyDataset)?;
        let len = first.features.len();
        for (index, ex) in examples.iter().enumerate() {
            if ex.features.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: ex.features.len(),
                });
            }
            Example::validate(&ex.features, ex.weight, index)?;
        }
        let conflict_pairs = find_conflict_pairs(&examples);
        Ok(Dataset {
            examples,
            dim: len - 1,
            conflict_pairs,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Feature dimension excluding the intercept.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn conflict_pairs(&self) -> &[(usize, usize)] {
        &self.conflict_pairs
    }

    /// Weight-expanded number of points.
    pub fn total_weight(&self) -> u64 {
        self.examples.iter().map(|e| e.weight).sum()
    }

    pub fn class_weights(&self) -> (u64, u64) {
        self.examples.iter().fold((0, 0), |(pos, neg), e| match e.label {
            Label::Positive => (pos + e.weight, neg),
            Label::Negative => (pos, neg + e.weight),
        })
    }

    pub fn has_groups(&self) -> bool {
        self.examples.iter().all(|e| e.group.is_some())
    }

    /// Returns a copy with every label negated.
    pub fn with_flipped_labels(&self) -> Dataset {
        let examples = self
            .examples
            .iter()
            .map(|e| Example {
                label: e.label.flipped(),
                ..e.clone()
            })
            .collect::<Vec<_>>();
        let conflict_pairs = find_conflict_pairs(&examples);
        Dataset {
            examples,
            dim: self.dim,
            conflict_pairs,
        }
    }

    /// Returns a copy with every group tag removed.
    pub fn without_groups(&self) -> Dataset {
        let examples = self
            .examples
            .iter()
            .map(|e| Example {
                group: None,
                ..e.clone()
            })
            .collect();
        Dataset {
            examples,
            dim: self.dim,
            conflict_pairs: self.conflict_pairs.clone(),
        }
    }

    /// Merges examples that share features, label, and group into a single
    /// weighted example. Returns the merged dataset and, for each original
    /// example, the index of the merged example that absorbed it.
    pub fn merge_duplicates(&self) -> (Dataset, Vec<usize>) {
        let mut slot: BTreeMap<(Vec<u64>, Label, Option<String>), usize> = BTreeMap::new();
        let mut merged: Vec<Example> = Vec::new();
        let mut mapping = Vec::with_capacity(self.examples.len());
        for ex in &self.examples {
            let key = (feature_key(&ex.features), ex.label, ex.group.clone());
            let idx = *slot.entry(key).or_insert_with(|| {
                merged.push(Example {
                    weight: 0,
                    ..ex.clone()
                });
                merged.len() - 1
            });
            merged[idx].weight += ex.weight;
            mapping.push(idx);
        }
        let conflict_pairs = find_conflict_pairs(&merged);
        (
            Dataset {
                examples: merged,
                dim: self.dim,
                conflict_pairs,
            },
            mapping,
        )
    }

    pub(crate) fn with_weights(&self, weights: &[u64]) -> Dataset {
        let examples = self
            .examples
            .iter()
            .zip(weights)
            .map(|(e, &w)| Example {
                weight: w,
                ..e.clone()
            })
            .collect();
        Dataset {
            examples,
            dim: self.dim,
            conflict_pairs: self.conflict_pairs.clone(),
        }
    }

    /// Keeps the examples at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let examples = indices
            .iter()
            .map(|&i| {
                self.examples
                    .get(i)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange {
                        index: i,
                        len: self.examples.len(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(examples)
    }
}

/// A linear classifier `x -> sign(w . x)` with `||w||_1 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    coefficients: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidClassifier("no coefficients".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite() || c.abs() > 1.0 + L1_TOLERANCE) {
            return Err(Error::InvalidClassifier(
                "coefficients must be finite and lie in [-1, 1]".into(),
            ));
        }
        let l1: f64 = coefficients.iter().map(|c| c.abs()).sum();
        if (l1 - 1.0).abs() > L1_TOLERANCE {
            return Err(Error::InvalidClassifier(format!(
                "l1 norm is {l1}, expected 1"
            )));
        }
        Ok(LinearClassifier { coefficients })
    }

    /// Rescales arbitrary coefficients to unit l1 norm. Predictions are
    /// unchanged. The zero vector, which predicts -1 everywhere under the tie
    /// rule, maps to the intercept-only classifier `(-1, 0, ..., 0)`.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() || raw.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidClassifier(
                "raw coefficients must be finite and nonempty".into(),
            ));
        }
        let l1: f64 = raw.iter().map(|c| c.abs()).sum();
        let coefficients = if l1 == 0.0 {
            let mut c = vec![0.0; raw.len()];
            c[0] = -1.0;
            c
        } else {
            raw.iter().map(|c| c / l1).collect()
        };
        Ok(LinearClassifier { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn negated(&self) -> LinearClassifier {
        LinearClassifier {
            coefficients: self.coefficients.iter().map(|c| -c).collect(),
        }
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                found: features.len(),
            });
        }
        Ok(dot(&self.coefficients, features))
    }

    /// Sign rule with ties (`w . x == 0`) mapped to -1.
    pub fn predict_features(&self, features: &[f64]) -> Result<Label> {
        Ok(label_of_score(self.score(features)?))
    }

    fn check_dim(&self, data: &Dataset) -> Result<()> {
        if data.dim + 1 != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                found: data.dim + 1,
            });
        }
        Ok(())
    }

    /// Predictions on every example of `data`.
    pub fn predictions(&self, data: &Dataset) -> Result<Vec<Label>> {
        self.check_dim(data)?;
        Ok(data
            .examples
            .iter()
            .map(|e| label_of_score(dot(&self.coefficients, &e.features)))
            .collect())
    }

    /// Smallest `|w . x_i|` over the dataset.
    pub fn min_abs_score(&self, data: &Dataset) -> Result<f64> {
        self.check_dim(data)?;
        Ok(data
            .examples
            .iter()
            .map(|e| dot(&self.coefficients, &e.features).abs())
            .fold(f64::INFINITY, f64::min))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn label_of_score(score: f64) -> Label {
    if score > 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn predict(h: &LinearClassifier, x: &Example) -> Result<Label> {
    h.predict_features(&x.features)
}

/// Exact weighted mistake count over `n` weight-expanded points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskReport {
    pub mistakes: u64,
    pub n: u64,
}

impl RiskReport {
    pub fn rate(&self) -> Ratio<u64> {
        Ratio::new(self.mistakes, self.n)
    }

    pub fn rate_f64(&self) -> f64 {
        self.mistakes as f64 / self.n as f64
    }
}

/// Weighted count of points where two classifiers disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub conflicts: u64,
    pub n: u64,
}

impl ConflictReport {
    pub fn rate(&self) -> Ratio<u64> {
        Ratio::new(self.conflicts, self.n)
    }
}

pub fn empirical_risk(h: &LinearClassifier, data: &Dataset) -> Result<RiskReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictions = h.predictions(data)?;
    let mistakes = data
        .examples
        .iter()
        .zip(&predictions)
        .filter(|(e, &p)| p != e.label)
        .map(|(e, _)| e.weight)
        .sum();
    Ok(RiskReport {
        mistakes,
        n: data.total_weight(),
    })
}

pub fn conflict_count(
    h1: &LinearClassifier,
    h2: &LinearClassifier,
    data: &Dataset,
) -> Result<ConflictReport> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch {
            expected: h1.len(),
            found: h2.len(),
        });
    }
    let p1 = h1.predictions(data)?;
    let p2 = h2.predictions(data)?;
    let conflicts = data
        .examples
        .iter()
        .zip(p1.iter().zip(&p2))
        .filter(|(_, (a, b))| a != b)
        .map(|(e, _)| e.weight)
        .sum();
    Ok(ConflictReport {
        conflicts,
        n: data.total_weight(),
    })
}

/// Raises minority-class weights one unit at a time, round-robin in index
/// order starting from a seeded position, until both classes carry equal
/// total weight.
pub fn oversample_minority(data: &Dataset, seed: u64) -> Result<Dataset> {
    let (pos, neg) = data.class_weights();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if pos == neg {
        return Ok(data.clone());
    }
    let minority = if pos < neg {
        Label::Positive
    } else {
        Label::Negative
    };
    let deficit = pos.abs_diff(neg);
    let members: Vec<usize> = data
        .examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == minority)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..members.len());
    let mut weights: Vec<u64> = data.examples.iter().map(|e| e.weight).collect();
    let m = members.len() as u64;
    for (offset, &idx) in members.iter().cycle().skip(start).take(members.len()).enumerate() {
        // Each member receives floor(deficit / m) plus one for the first
        // `deficit % m` positions of the round-robin.
        let extra = deficit / m + u64::from((offset as u64) < deficit % m);
        weights[idx] += extra;
    }
    Ok(data.with_weights(&weights))
}

/// Deterministic maximum matching between positive and negative examples
/// with identical features: within each feature vector, the k-th positive
/// (by index) is paired with the k-th negative. Pairs are `(positive,
/// negative)` sorted by the positive index.
pub fn find_conflict_pairs(examples: &[Example]) -> Vec<(usize, usize)> {
    let mut by_features: BTreeMap<Vec<u64>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        let entry = by_features.entry(feature_key(&e.features)).or_default();
        match e.label {
            Label::Positive => entry.0.push(i),
            Label::Negative => entry.1.push(i),
        }
    }
    let mut pairs: Vec<(usize, usize)> = by_features
        .values()
        .flat_map(|(p, n)| p.iter().copied().zip(n.iter().copied()))
        .collect();
    pairs.sort_unstable();
    pairs
}
