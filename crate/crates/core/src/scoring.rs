//! Glue between a trained model, a dataset and the activation matrix.

use rayon::prelude::*;

use crate::activation::{binarize, score, ActivationPattern, CumulativeActivationMatrix, MatrixBuilder, ScoredSample};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::tinynet::{infer, FeedforwardModel};

/// Samples per partition when building a matrix in parallel.
const PARTITION: usize = 4096;

/// Predicted class and penultimate activation pattern of every sample, in dataset order.
pub fn predictions_and_patterns(
    model: &FeedforwardModel,
    dataset: &LabeledDataset,
) -> Result<Vec<(usize, ActivationPattern)>> {
    infer(model, dataset)?
        .into_iter()
        .map(|inf| Ok((inf.predicted, binarize(&inf.penultimate_raw)?)))
        .collect()
}

/// Counts penultimate activations over `dataset` grouped by each sample's
/// true class label. Partitions are built in parallel and merged.
pub fn build_activation_matrix(
    model: &FeedforwardModel,
    dataset: &LabeledDataset,
    class_names: Option<Vec<String>>,
) -> Result<CumulativeActivationMatrix> {
    let n = model.penultimate_width();
    let k = model.classes();
    let patterns = predictions_and_patterns(model, dataset)?;
    let labels = dataset.class_labels();
    let partials = patterns
        .par_chunks(PARTITION)
        .zip(labels.par_chunks(PARTITION))
        .map(|(chunk, chunk_labels)| {
            let mut builder = MatrixBuilder::new(n, k)?;
            for ((_, pattern), &label) in chunk.iter().zip(chunk_labels) {
                builder.push(pattern, label)?;
            }
            builder.finish()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut merged = partials
        .into_iter()
        .reduce(|a, b| a.merge(&b).expect("partitions share shape"))
        .ok_or_else(|| Error::invalid("cannot build an activation matrix from an empty dataset"))?;
    if let Some(names) = class_names {
        merged = merged.with_class_names(names)?;
    }
    Ok(merged)
}

/// Scores every sample against `matrix` under its predicted class.
pub fn score_dataset(
    model: &FeedforwardModel,
    matrix: &CumulativeActivationMatrix,
    dataset: &LabeledDataset,
) -> Result<Vec<ScoredSample>> {
    if model.penultimate_width() != matrix.neurons() {
        return Err(Error::DimensionMismatch {
            what: "model penultimate width vs matrix neurons",
            expected: matrix.neurons(),
            actual: model.penultimate_width(),
        });
    }
    if model.classes() != matrix.classes() {
        return Err(Error::DimensionMismatch {
            what: "model classes vs matrix classes",
            expected: matrix.classes(),
            actual: model.classes(),
        });
    }
    predictions_and_patterns(model, dataset)?
        .into_iter()
        .enumerate()
        .map(|(i, (predicted, pattern))| {
            Ok(ScoredSample {
                sample_id: dataset.sample_ids()[i],
                predicted,
                true_label: Some(dataset.class_labels()[i]),
                subclass: Some(dataset.subclass_tags()[i]),
                score: score(&pattern, matrix, predicted)?.value(),
            })
        })
        .collect()
}
