//! Analyses over scored predictions and the rarefaction experiment drivers.
//!
//! Score ties are always broken by ascending sample id so every report is
//! deterministic.

mod rarity;
pub mod report;

pub use rarity::{
    oversampling_mitigation, rarity_experiment, trial_seed, DigitRatio, MitigationConfig, MitigationResult,
    RarityConfig, RarityExperiment, RarityTrialResult, train_with_seed,
};

use std::cmp::Ordering;

use crate::activation::ScoredSample;
use crate::error::{Error, Result};

/// `rate_rare / rate_common`.
pub fn ratio(rate_rare: f64, rate_common: f64) -> Result<f64> {
    if rate_common == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(rate_rare / rate_common)
}

fn by_score_then_id(a: &ScoredSample, b: &ScoredSample) -> Ordering {
    a.score.total_cmp(&b.score).then(a.sample_id.cmp(&b.sample_id))
}

fn require_labels(scored: &[ScoredSample]) -> Result<Vec<bool>> {
    scored
        .iter()
        .map(|s| {
            s.is_misclassified()
                .ok_or_else(|| Error::invalid(format!("sample {} has no true label", s.sample_id)))
        })
        .collect()
}

/// Ten score-ordered groups with their misclassification counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecileReport {
    /// Eleven cut positions into the score-sorted list; group `g` spans
    /// `group_bounds[g]..group_bounds[g + 1]`.
    pub group_bounds: Vec<usize>,
    /// `(sample_count, misclassified_count)` per group, lowest scores first.
    pub per_group: Vec<(usize, usize)>,
}

impl DecileReport {
    pub fn rate(&self, group: usize) -> f64 {
        let (count, wrong) = self.per_group[group];
        wrong as f64 / count as f64
    }
}

/// Splits samples, sorted by ascending score, into ten contiguous groups.
/// With `N % 10 = r`, the first `r` groups take one extra sample.
pub fn decile_analysis(scored: &[ScoredSample]) -> Result<DecileReport> {
    const GROUPS: usize = 10;
    if scored.len() < GROUPS {
        return Err(Error::invalid(format!(
            "decile analysis needs at least {GROUPS} samples, got {}",
            scored.len()
        )));
    }
    require_labels(scored)?;
    let mut sorted: Vec<&ScoredSample> = scored.iter().collect();
    sorted.sort_by(|a, b| by_score_then_id(a, b));

    let (base, extra) = (scored.len() / GROUPS, scored.len() % GROUPS);
    let mut group_bounds = vec![0];
    for g in 0..GROUPS {
        let size = base + usize::from(g < extra);
        group_bounds.push(group_bounds[g] + size);
    }
    let per_group = group_bounds
        .windows(2)
        .map(|w| {
            let group = &sorted[w[0]..w[1]];
            let wrong = group.iter().filter(|s| s.is_misclassified() == Some(true)).count();
            (group.len(), wrong)
        })
        .collect();
    Ok(DecileReport {
        group_bounds,
        per_group,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierSummary {
    pub overall_rate: f64,
    /// Absent when no sample scores below tau.
    pub outlier_rate: Option<f64>,
    pub outlier_count: usize,
    pub outlier_misclassified: usize,
}

/// Misclassification rate overall and among samples scoring strictly below `tau`.
pub fn outlier_misclassification(scored: &[ScoredSample], tau: f64) -> Result<OutlierSummary> {
    if scored.is_empty() {
        return Err(Error::invalid("outlier analysis of an empty sample list"));
    }
    let wrong = require_labels(scored)?;
    let overall = wrong.iter().filter(|&&w| w).count();
    let (mut outlier_count, mut outlier_misclassified) = (0, 0);
    for (s, &w) in scored.iter().zip(&wrong) {
        if s.score < tau {
            outlier_count += 1;
            outlier_misclassified += usize::from(w);
        }
    }
    Ok(OutlierSummary {
        overall_rate: overall as f64 / scored.len() as f64,
        outlier_rate: (outlier_count > 0).then(|| outlier_misclassified as f64 / outlier_count as f64),
        outlier_count,
        outlier_misclassified,
    })
}

/// Lowest- and highest-scoring samples predicted as one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremesReport {
    pub class_id: usize,
    /// Ascending by score.
    pub lowest: Vec<u64>,
    /// Descending by score.
    pub highest: Vec<u64>,
    /// Set when the class has fewer than the requested number of samples.
    pub truncated: bool,
}

pub const DEFAULT_EXTREMES_COUNT: usize = 25;

pub fn extremes_report(scored: &[ScoredSample], class_id: usize, m: usize) -> Result<ExtremesReport> {
    let mut members: Vec<&ScoredSample> = scored.iter().filter(|s| s.predicted == class_id).collect();
    if members.is_empty() {
        return Err(Error::invalid(format!("no samples predicted as class {class_id}")));
    }
    let take = m.min(members.len());
    members.sort_by(|a, b| by_score_then_id(a, b));
    let lowest = members.iter().take(take).map(|s| s.sample_id).collect();
    members.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.sample_id.cmp(&b.sample_id)));
    let highest = members.iter().take(take).map(|s| s.sample_id).collect();
    Ok(ExtremesReport {
        class_id,
        lowest,
        highest,
        truncated: take < m,
    })
}
