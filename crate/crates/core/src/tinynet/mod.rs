//! A small dense feedforward classifier: ReLU hidden layers, a softmax
//! output, cross-entropy loss and mini-batch gradient descent, all in `f64`.
//!
//! The penultimate (last hidden) layer's post-ReLU output is exposed on every
//! forward pass so it can be binarized into an activation pattern.

mod gradcheck;
mod io;
mod train;

pub use gradcheck::{gradient_check, gradient_check_against, DEFAULT_GRADCHECK_EPSILON};
pub use io::MODEL_MAGIC;
pub use train::{evaluate, evaluate_predictions, infer, train, EpochStats, Evaluation, Inference, TrainConfig};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nonlinearity {
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub nonlinearity: Nonlinearity,
}

impl LayerSpec {
    pub fn relu(input_width: usize, output_width: usize) -> Self {
        Self {
            input_width,
            output_width,
            nonlinearity: Nonlinearity::Relu,
        }
    }

    pub fn softmax(input_width: usize, output_width: usize) -> Self {
        Self {
            input_width,
            output_width,
            nonlinearity: Nonlinearity::Softmax,
        }
    }
}

/// Architecture used for MNIST parity: 784 inputs, one 100-unit ReLU layer,
/// a two-way softmax.
pub fn parity_architecture() -> Vec<LayerSpec> {
    vec![LayerSpec::relu(784, 100), LayerSpec::softmax(100, 2)]
}

/// Parses `784,100,2`-style width lists into ReLU layers capped by a softmax.
pub fn architecture_from_widths(widths: &[usize]) -> Result<Vec<LayerSpec>> {
    if widths.len() < 3 {
        return Err(Error::invalid(
            "architecture needs input, at least one hidden width, and output width",
        ));
    }
    let last = widths.len() - 2;
    Ok(widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if i == last {
                LayerSpec::softmax(w[0], w[1])
            } else {
                LayerSpec::relu(w[0], w[1])
            }
        })
        .collect())
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::invalid(
            "model needs at least one hidden ReLU layer before the softmax output",
        ));
    }
    for (i, spec) in specs.iter().enumerate() {
        if spec.input_width == 0 || spec.output_width == 0 {
            return Err(Error::invalid(format!("layer {i} has a zero width")));
        }
        let is_last = i + 1 == specs.len();
        match (spec.nonlinearity, is_last) {
            (Nonlinearity::Softmax, false) => {
                return Err(Error::invalid(format!(
                    "layer {i}: softmax is only allowed on the final layer"
                )))
            }
            (Nonlinearity::Relu, true) => {
                return Err(Error::invalid("final layer must be softmax"));
            }
            _ => {}
        }
        if let Some(prev) = i.checked_sub(1).map(|p| &specs[p]) {
            if prev.output_width != spec.input_width {
                return Err(Error::invalid(format!(
                    "layer {i} expects width {} but layer {} produces {}",
                    spec.input_width,
                    i - 1,
                    prev.output_width
                )));
            }
        }
    }
    if specs[specs.len() - 1].output_width < 2 {
        return Err(Error::invalid("softmax output needs at least two classes"));
    }
    Ok(())
}

/// One dense layer; `weights` is row-major `output_width x input_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardModel {
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// Post-ReLU output of the last hidden layer.
    pub penultimate_raw: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Parameter gradients laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub(crate) fn zeros_like(model: &FeedforwardModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub(crate) fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|g| g.fill(0.0));
    }

    /// Flat view in parameter order: per layer, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    /// `outputs[l]` is the post-nonlinearity output of layer `l`.
    outputs: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    nonzero: Vec<usize>,
    /// Pre-softmax output of the final layer.
    logits: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(model: &FeedforwardModel) -> Self {
        let widths = || model.layers.iter().map(|l| vec![0.0; l.spec.output_width]);
        Self {
            outputs: widths().collect(),
            deltas: widths().collect(),
            nonzero: Vec::with_capacity(model.input_dim()),
            logits: vec![0.0; model.classes()],
        }
    }

    pub(crate) fn probabilities(&self) -> &[f64] {
        self.outputs.last().expect("model has layers")
    }

    pub(crate) fn penultimate(&self) -> &[f64] {
        &self.outputs[self.outputs.len() - 2]
    }

    /// `-ln p[label]` from the last forward pass, evaluated in log space.
    pub(crate) fn cross_entropy(&self, label: usize, (max, log_sum): (f64, f64)) -> f64 {
        log_sum - (self.logits[label] - max)
    }
}

/// `out = W x + b`, visiting only the non-zero entries of `x`.
fn affine_sparse(layer: &Layer, x: &[f64], nonzero: &mut Vec<usize>, out: &mut [f64]) {
    nonzero.clear();
    nonzero.extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i));
    let width = layer.spec.input_width;
    for (o, (z, row)) in out.iter_mut().zip(layer.weights.chunks_exact(width)).enumerate() {
        let mut acc = layer.biases[o];
        for &i in nonzero.iter() {
            acc += row[i] * x[i];
        }
        *z = acc;
    }
}

/// In-place softmax with the maximum subtracted before exponentiation.
/// Returns `(max, ln(sum(exp(z - max))))`.
fn softmax_in_place(z: &mut [f64]) -> (f64, f64) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    (max, sum.ln())
}

impl FeedforwardModel {
    /// Seeded uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = SplitMix64::new(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let bound = 1.0 / (spec.input_width as f64).sqrt();
                let weights = (0..spec.input_width * spec.output_width)
                    .map(|_| rng.uniform(-bound, bound))
                    .collect();
                Layer {
                    spec,
                    weights,
                    biases: vec![0.0; spec.output_width],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Wraps explicit parameters, validating shapes and finiteness.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for (i, layer) in layers.iter().enumerate() {
            let spec = layer.spec;
            if layer.weights.len() != spec.input_width * spec.output_width
                || layer.biases.len() != spec.output_width
            {
                return Err(Error::invalid(format!("layer {i} parameter shape mismatch")));
            }
            if layer.weights.iter().chain(&layer.biases).any(|p| !p.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// `m`.
    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_width
    }

    /// `k`.
    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_width
    }

    /// `n`, the width of the last hidden layer.
    pub fn penultimate_width(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.input_width
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub(crate) fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "model input length",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("input element {i} is not finite")));
        }
        Ok(())
    }

    /// Runs all layers into `ws`; returns `(max logit, ln sum exp(logit - max))`.
    pub(crate) fn forward_into(&self, input: &[f64], ws: &mut Workspace) -> (f64, f64) {
        let Workspace {
            outputs,
            nonzero,
            logits,
            ..
        } = ws;
        let mut lse = (0.0, 0.0);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = outputs.split_at_mut(l);
            let x: &[f64] = if l == 0 { input } else { &done[l - 1] };
            let out = &mut rest[0];
            affine_sparse(layer, x, nonzero, out);
            match layer.spec.nonlinearity {
                Nonlinearity::Relu => out.iter_mut().for_each(|v| *v = v.max(0.0)),
                Nonlinearity::Softmax => {
                    logits.copy_from_slice(out);
                    lse = softmax_in_place(out);
                }
            }
        }
        lse
    }

    /// Forward pass then backprop of `-ln p[label]`, adding into `grads`.
    /// Returns the sample loss.
    pub(crate) fn accumulate_gradients(
        &self,
        input: &[f64],
        label: usize,
        ws: &mut Workspace,
        grads: &mut Gradients,
    ) -> f64 {
        let lse = self.forward_into(input, ws);
        let loss = ws.cross_entropy(label, lse);
        let last = self.layers.len() - 1;
        let probs = &ws.outputs[last];

        ws.deltas[last].copy_from_slice(probs);
        ws.deltas[last][label] -= 1.0;

        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let width = layer.spec.input_width;
            let x: &[f64] = if l == 0 { input } else { &ws.outputs[l - 1] };
            ws.nonzero.clear();
            ws.nonzero
                .extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i));

            let (lower, upper) = ws.deltas.split_at_mut(l);
            let delta = &upper[0];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * width..(o + 1) * width];
                for &i in &ws.nonzero {
                    row[i] += d * x[i];
                }
            }

            if l > 0 {
                // Through the ReLU: only units with positive output pass gradient.
                let below = &mut lower[l - 1];
                below.fill(0.0);
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * width..(o + 1) * width];
                    for &i in &ws.nonzero {
                        below[i] += row[i] * d;
                    }
                }
            }
        }
        loss
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardResult> {
        self.check_input(input)?;
        let mut ws = Workspace::new(self);
        self.forward_into(input, &mut ws);
        let n = self.layers.len();
        Ok(ForwardResult {
            penultimate_raw: ws.outputs[n - 2].clone(),
            probabilities: ws.outputs[n - 1].clone(),
        })
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(input)?.probabilities))
    }

    /// Cross-entropy `-ln p[label]` of one sample, computed from the
    /// log-sum-exp of the logits.
    pub fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        self.check_input(input)?;
        self.check_label(label)?;
        let mut ws = Workspace::new(self);
        let lse = self.forward_into(input, &mut ws);
        Ok(ws.cross_entropy(label, lse))
    }

    /// Analytic cross-entropy gradients for one sample.
    pub fn gradients(&self, input: &[f64], label: usize) -> Result<Gradients> {
        self.check_input(input)?;
        self.check_label(label)?;
        let mut ws = Workspace::new(self);
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradients(input, label, &mut ws, &mut grads);
        Ok(grads)
    }

    /// `theta -= learning_rate * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }

    pub(crate) fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.classes() {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.classes()
            )));
        }
        Ok(())
    }

    /// Mutable access to parameter `index` in flattened order.
    pub(crate) fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                return &mut layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return &mut layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
