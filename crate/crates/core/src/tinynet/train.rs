use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{argmax, FeedforwardModel, Gradients, Workspace};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(Error::invalid(format!(
                "batch size {} must be in 1..={dataset_len}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Running mean loss and accuracy over one epoch's mini-batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

fn check_compatible(model: &FeedforwardModel, dataset: &LabeledDataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if dataset.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "dataset image size vs model input",
            expected: model.input_dim(),
            actual: dataset.input_dim(),
        });
    }
    if dataset.classes() > model.classes() {
        return Err(Error::DimensionMismatch {
            what: "dataset class count vs model outputs",
            expected: model.classes(),
            actual: dataset.classes(),
        });
    }
    Ok(())
}

/// Mini-batch gradient descent on mean cross-entropy.
///
/// Each epoch visits the data in an order shuffled by a generator seeded from
/// `(cfg.seed, epoch)`; the final partial batch is kept. The input model is
/// left untouched.
pub fn train(
    model: &FeedforwardModel,
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(FeedforwardModel, Vec<EpochStats>)> {
    check_compatible(model, dataset)?;
    cfg.validate(dataset.len())?;

    let mut model = model.clone();
    let mut ws = Workspace::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut input = Vec::with_capacity(dataset.input_dim());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        SplitMix64::new(derive_seed(cfg.seed, &[epoch as u64])).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let mut batch_loss = 0.0;
            for &i in batch {
                let label = dataset.class_labels()[i];
                dataset.input_into(i, &mut input);
                batch_loss += model.accumulate_gradients(&input, label, &mut ws, &mut grads);
                if argmax(ws.probabilities()) == label {
                    correct += 1;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += batch_loss;
            model.apply_gradients(&grads, cfg.learning_rate / batch.len() as f64);
        }
        history.push(EpochStats {
            epoch,
            loss: loss_sum / dataset.len() as f64,
            accuracy: correct as f64 / dataset.len() as f64,
        });
    }
    if model
        .layers()
        .iter()
        .any(|l| l.weights.iter().chain(&l.biases).any(|p| !p.is_finite()))
    {
        return Err(Error::Divergence {
            epoch: cfg.epochs - 1,
        });
    }
    Ok((model, history))
}

/// One sample's prediction and penultimate-layer output.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub predicted: usize,
    pub penultimate_raw: Vec<f64>,
}

/// Runs the model over every sample, in dataset order. Parallel across samples.
pub fn infer(model: &FeedforwardModel, dataset: &LabeledDataset) -> Result<Vec<Inference>> {
    check_compatible(model, dataset)?;
    Ok((0..dataset.len())
        .into_par_iter()
        .map_init(
            || (Workspace::new(model), Vec::with_capacity(dataset.input_dim())),
            |(ws, input), i| {
                dataset.input_into(i, input);
                model.forward_into(input, ws);
                Inference {
                    predicted: argmax(ws.probabilities()),
                    penultimate_raw: ws.penultimate().to_vec(),
                }
            },
        )
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub misclassification_rate: f64,
    pub total: usize,
    pub misclassified: usize,
    /// Subclass tag to `(total, misclassified)`.
    pub per_subclass: BTreeMap<u8, (usize, usize)>,
}

impl Evaluation {
    /// Misclassification rate within one subclass, if it has samples.
    pub fn subclass_rate(&self, tag: u8) -> Option<f64> {
        self.per_subclass
            .get(&tag)
            .filter(|(total, _)| *total > 0)
            .map(|&(total, wrong)| wrong as f64 / total as f64)
    }
}

/// Tallies predictions against true labels, overall and per subclass.
pub fn evaluate_predictions(dataset: &LabeledDataset, predictions: &[usize]) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    if predictions.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction count",
            expected: dataset.len(),
            actual: predictions.len(),
        });
    }
    let mut per_subclass = BTreeMap::new();
    let mut misclassified = 0;
    for ((&pred, &label), &tag) in predictions
        .iter()
        .zip(dataset.class_labels())
        .zip(dataset.subclass_tags())
    {
        let wrong = pred != label;
        misclassified += usize::from(wrong);
        let entry = per_subclass.entry(tag).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += usize::from(wrong);
    }
    let total = dataset.len();
    let misclassification_rate = misclassified as f64 / total as f64;
    Ok(Evaluation {
        accuracy: 1.0 - misclassification_rate,
        misclassification_rate,
        total,
        misclassified,
        per_subclass,
    })
}

pub fn evaluate(model: &FeedforwardModel, dataset: &LabeledDataset) -> Result<Evaluation> {
    let predictions: Vec<usize> = infer(model, dataset)?.into_iter().map(|i| i.predicted).collect();
    evaluate_predictions(dataset, &predictions)
}
