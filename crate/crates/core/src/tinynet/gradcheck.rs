use super::{FeedforwardModel, Gradients};
use crate::error::Result;
use crate::rng::SplitMix64;

pub const DEFAULT_GRADCHECK_EPSILON: f64 = 1e-5;

/// Models with more parameters than this are checked on a seeded subset.
const FULL_CHECK_LIMIT: usize = 4096;
const SUBSET_SIZE: usize = 256;

/// Largest relative error between backprop gradients and central finite
/// differences of the cross-entropy, using `max(|a|, |b|, 1e-8)` as the
/// denominator.
pub fn gradient_check(model: &FeedforwardModel, input: &[f64], label: usize, epsilon: f64) -> Result<f64> {
    let analytic = model.gradients(input, label)?;
    gradient_check_against(model, input, label, epsilon, &analytic)
}

/// Like [`gradient_check`], but compares against caller-supplied gradients.
pub fn gradient_check_against(
    model: &FeedforwardModel,
    input: &[f64],
    label: usize,
    epsilon: f64,
    analytic: &Gradients,
) -> Result<f64> {
    model.check_input(input)?;
    model.check_label(label)?;
    let flat = analytic.flatten();
    let count = model.parameter_count();

    let indices: Vec<usize> = if count <= FULL_CHECK_LIMIT {
        (0..count).collect()
    } else {
        let mut rng = SplitMix64::new(0x6772_6164_6368_6b00);
        (0..SUBSET_SIZE).map(|_| rng.below(count as u64) as usize).collect()
    };

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for idx in indices {
        let original = *probe.parameter_mut(idx);
        *probe.parameter_mut(idx) = original + epsilon;
        let plus = probe.loss(input, label)?;
        *probe.parameter_mut(idx) = original - epsilon;
        let minus = probe.loss(input, label)?;
        *probe.parameter_mut(idx) = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = flat[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
