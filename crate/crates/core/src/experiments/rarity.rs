use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::ratio;
use crate::datasets::{oversample, rarify, LabeledDataset, RarefactionSpec};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::scoring::{build_activation_matrix, score_dataset};
use crate::tinynet::{evaluate, parity_architecture, train, Evaluation, FeedforwardModel, LayerSpec, TrainConfig};

/// Seed of trial `trial` for rarefied digit `digit`: `derive_seed(master, [digit, trial])`.
///
/// Inside a trial, rarefaction uses `derive_seed(trial_seed, [0])`, weight
/// init `derive_seed(trial_seed, [1])` and batch shuffling `derive_seed(trial_seed, [2])`.
pub fn trial_seed(master: u64, digit: u8, trial: usize) -> u64 {
    derive_seed(master, &[u64::from(digit), trial as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RarityConfig {
    pub digits: Vec<u8>,
    pub trials_per_digit: usize,
    pub drop_probability: f64,
    pub architecture: Vec<LayerSpec>,
    /// Hyperparameters for every trial; the seed field is replaced per trial.
    pub train: TrainConfig,
    pub master_seed: u64,
}

impl Default for RarityConfig {
    fn default() -> Self {
        Self {
            digits: (0..10).collect(),
            trials_per_digit: 30,
            drop_probability: 0.8,
            architecture: parity_architecture(),
            train: TrainConfig::default(),
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RarityTrialResult {
    pub digit: u8,
    pub trial: usize,
    /// Test misclassification rate of the rarefied digit.
    pub rate_rare: f64,
    /// Test misclassification rates of every other digit in this trial.
    pub rate_common_per_digit: BTreeMap<u8, f64>,
}

/// Per-digit aggregate: mean rate when rare, mean rate when common, and their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitRatio {
    pub digit: u8,
    pub mean_rate_rare: f64,
    /// Mean over all trials in which another digit was rarefied.
    pub mean_rate_common: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RarityExperiment {
    /// Sorted by `(digit, trial)`.
    pub trials: Vec<RarityTrialResult>,
    pub summary: Vec<DigitRatio>,
    pub models_trained: usize,
}

/// Trains a fresh model whose init and shuffle seeds derive from `seed`:
/// `derive_seed(seed, [1])` and `derive_seed(seed, [2])`.
pub fn train_with_seed(
    architecture: &[LayerSpec],
    data: &LabeledDataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<FeedforwardModel> {
    let init = FeedforwardModel::init(architecture, derive_seed(seed, &[1]))?;
    let cfg = TrainConfig {
        seed: derive_seed(seed, &[2]),
        ..*cfg
    };
    Ok(train(&init, data, &cfg)?.0)
}

fn digit_rate(eval: &Evaluation, digit: u8) -> Result<f64> {
    eval.subclass_rate(digit)
        .ok_or_else(|| Error::invalid(format!("test set has no samples of digit {digit}")))
}

/// For each digit and trial: rarefy the digit in the training data, train a
/// fresh model, and record per-digit misclassification rates on `test`.
/// Trials run in parallel; results do not depend on scheduling.
pub fn rarity_experiment(
    train_data: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &RarityConfig,
) -> Result<RarityExperiment> {
    if cfg.trials_per_digit == 0 {
        return Err(Error::invalid("trials_per_digit must be at least 1"));
    }
    if cfg.digits.is_empty() {
        return Err(Error::invalid("no digits selected"));
    }
    let digits: BTreeSet<u8> = cfg.digits.iter().copied().collect();
    let jobs: Vec<(u8, usize)> = digits
        .iter()
        .flat_map(|&d| (0..cfg.trials_per_digit).map(move |t| (d, t)))
        .collect();

    let mut trials = jobs
        .par_iter()
        .map(|&(digit, trial)| {
            let seed = trial_seed(cfg.master_seed, digit, trial);
            let spec = RarefactionSpec::new(digit, cfg.drop_probability, derive_seed(seed, &[0]))?;
            let rare = rarify(train_data, &spec);
            let model = train_with_seed(&cfg.architecture, &rare, &cfg.train, seed)?;
            let eval = evaluate(&model, test)?;
            let rate_rare = digit_rate(&eval, digit)?;
            let rate_common_per_digit = (0..10u8)
                .filter(|&d| d != digit)
                .filter_map(|d| eval.subclass_rate(d).map(|r| (d, r)))
                .collect();
            Ok(RarityTrialResult {
                digit,
                trial,
                rate_rare,
                rate_common_per_digit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| (t.digit, t.trial));

    let summary = digits
        .iter()
        .map(|&digit| {
            let rare: Vec<f64> = trials.iter().filter(|t| t.digit == digit).map(|t| t.rate_rare).collect();
            let common: Vec<f64> = trials
                .iter()
                .filter(|t| t.digit != digit)
                .filter_map(|t| t.rate_common_per_digit.get(&digit).copied())
                .collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let mean_rate_rare = mean(&rare);
            let mean_rate_common = (!common.is_empty()).then(|| mean(&common));
            DigitRatio {
                digit,
                mean_rate_rare,
                mean_rate_common,
                ratio: mean_rate_common.and_then(|c| ratio(mean_rate_rare, c).ok()),
            }
        })
        .collect();

    Ok(RarityExperiment {
        models_trained: trials.len(),
        trials,
        summary,
    })
}

/// Training-time mitigation run: rarefy a digit, train, oversample the
/// lowest-scoring retained samples of that digit, retrain, compare.
#[derive(Debug, Clone, PartialEq)]
pub struct MitigationConfig {
    pub digit: u8,
    pub drop_probability: f64,
    /// Copies appended to the training set.
    pub added_count: usize,
    /// Share of the retained target-digit samples, lowest scores first, that
    /// are eligible for copying.
    pub selection_fraction: f64,
    pub architecture: Vec<LayerSpec>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            digit: 9,
            drop_probability: 0.8,
            added_count: 1000,
            selection_fraction: 0.5,
            architecture: parity_architecture(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationResult {
    pub rate_before: f64,
    pub rate_after: f64,
    pub retained_target: usize,
    pub selected: usize,
}

/// Both models share the same init and shuffle seeds; only the training data differ.
/// Seeds: rarefaction `derive_seed(seed, [0])`, model `[1]` and `[2]`,
/// oversampling `[3]`.
pub fn oversampling_mitigation(
    train_data: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &MitigationConfig,
) -> Result<MitigationResult> {
    if !(cfg.selection_fraction > 0.0 && cfg.selection_fraction <= 1.0) {
        return Err(Error::invalid("selection fraction must be in (0, 1]"));
    }
    let spec = RarefactionSpec::new(cfg.digit, cfg.drop_probability, derive_seed(cfg.seed, &[0]))?;
    let rare = rarify(train_data, &spec);
    let before = train_with_seed(&cfg.architecture, &rare, &cfg.train, cfg.seed)?;
    let rate_before = digit_rate(&evaluate(&before, test)?, cfg.digit)?;

    let matrix = build_activation_matrix(&before, &rare, None)?;
    let mut candidates: Vec<_> = score_dataset(&before, &matrix, &rare)?
        .into_iter()
        .filter(|s| s.subclass == Some(cfg.digit))
        .collect();
    if candidates.is_empty() {
        return Err(Error::invalid(format!("no samples of digit {} survived rarefaction", cfg.digit)));
    }
    candidates.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.sample_id.cmp(&b.sample_id)));
    let take = ((candidates.len() as f64 * cfg.selection_fraction).ceil() as usize).max(1);
    let selected: BTreeSet<u64> = candidates.iter().take(take).map(|s| s.sample_id).collect();

    let augmented = oversample(&rare, &selected, cfg.added_count, derive_seed(cfg.seed, &[3]))?;
    let after = train_with_seed(&cfg.architecture, &augmented, &cfg.train, cfg.seed)?;
    let rate_after = digit_rate(&evaluate(&after, test)?, cfg.digit)?;

    Ok(MitigationResult {
        rate_before,
        rate_after,
        retained_target: candidates.len(),
        selected: selected.len(),
    })
}
