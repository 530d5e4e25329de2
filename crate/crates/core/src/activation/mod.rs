//! Commonality scoring over binarized penultimate-layer activations.
//!
//! A trained classifier's penultimate layer is reduced to a binary
//! [`ActivationPattern`] per sample. Counting those patterns per class over the
//! training set gives a [`CumulativeActivationMatrix`]; a new sample's
//! [`CommonalityScore`] is the share of its predicted class's activation mass
//! that falls on neurons the sample also fires. Low scores mark samples that
//! look little like anything the model was trained on.

mod matrix;
mod threshold;

pub use matrix::{CumulativeActivationMatrix, MatrixBuilder};
pub use threshold::{quartiles, tukey_threshold, TukeyThreshold, DEFAULT_K_FENCE};

use crate::error::{Error, Result};

/// Binary firing pattern of the penultimate layer for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    bits: Vec<bool>,
}

impl ActivationPattern {
    pub fn from_bools(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("activation pattern must have at least one neuron"));
        }
        Ok(Self { bits })
    }

    /// Builds a pattern from 0/1 bytes; any other byte value is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let bools = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid(format!(
                    "activation bit {i} is {other}, expected 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bools(bools)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| u8::from(b)).collect()
    }
}

/// Neuron `i` is active iff its post-nonlinearity output is strictly positive.
pub fn binarize(raw_activations: &[f64]) -> Result<ActivationPattern> {
    if raw_activations.is_empty() {
        return Err(Error::invalid("cannot binarize an empty activation vector"));
    }
    ActivationPattern::from_bools(raw_activations.iter().map(|&a| a > 0.0).collect())
}

/// Commonality score, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CommonalityScore(f64);

impl CommonalityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Scores `pattern` against the activation column of `predicted_class`.
///
/// The result is the sum of the column's counts over the neurons that fired,
/// divided by the column total. Runs in O(n).
pub fn score(
    pattern: &ActivationPattern,
    matrix: &CumulativeActivationMatrix,
    predicted_class: usize,
) -> Result<CommonalityScore> {
    if pattern.len() != matrix.neurons() {
        return Err(Error::DimensionMismatch {
            what: "activation pattern length",
            expected: matrix.neurons(),
            actual: pattern.len(),
        });
    }
    if predicted_class >= matrix.classes() {
        return Err(Error::invalid(format!(
            "class {predicted_class} out of range for a {}-class matrix",
            matrix.classes()
        )));
    }
    let total = matrix.column_total(predicted_class);
    if total == 0 {
        return Err(Error::UndefinedScore {
            class: predicted_class,
        });
    }
    let k = matrix.classes();
    let counts = matrix.counts();
    let fired: u64 = pattern
        .bits()
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(i, _)| counts[i * k + predicted_class])
        .sum();
    Ok(CommonalityScore(fired as f64 / total as f64))
}

/// One scored prediction, the unit every downstream analysis works on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub sample_id: u64,
    pub predicted: usize,
    pub true_label: Option<usize>,
    pub subclass: Option<u8>,
    pub score: f64,
}

impl ScoredSample {
    /// `None` when the true label is unknown.
    pub fn is_misclassified(&self) -> Option<bool> {
        self.true_label.map(|t| t != self.predicted)
    }
}

/// Splits samples into those scoring strictly below `tau` and the rest,
/// preserving input order within each side.
pub fn partition_outliers(
    samples: &[ScoredSample],
    tau: f64,
) -> (Vec<ScoredSample>, Vec<ScoredSample>) {
    samples.iter().cloned().partition(|s| s.score < tau)
}
