//! Softmax regression and tanh MLPs over a flat parameter vector, with
//! cross-entropy loss and analytic gradients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Dataset;
use crate::paramvec::ParamVec;
use crate::rng::normal;
use crate::{math, Error, Result};

#[cfg(feature = "serde")]
fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Architecture {
    /// `logits = W x + b`.
    Softmax,
    /// `layers` tanh layers of width `hidden`, then a linear output layer.
    Mlp {
        hidden: usize,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        layers: usize,
    },
}

impl Architecture {
    /// A single hidden layer of width `hidden`.
    pub fn mlp(hidden: usize) -> Self {
        Self::Mlp { hidden, layers: 1 }
    }

    /// Layer widths from input to output.
    pub fn widths(self, inputs: usize, classes: usize) -> Vec<usize> {
        let mut w = vec![inputs];
        if let Self::Mlp { hidden, layers } = self {
            w.extend(core::iter::repeat(hidden).take(layers));
        }
        w.push(classes);
        w
    }

    /// Flattened parameter count for `inputs` features and `classes` outputs.
    pub fn param_count(self, inputs: usize, classes: usize) -> usize {
        self.widths(inputs, classes).windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// A classifier whose parameters live in one [`ParamVec`].
///
/// Layout: each layer stores its weight matrix row-major (one row per
/// output unit) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    inputs: usize,
    classes: usize,
    params: ParamVec,
}

fn log_softmax_terms(logits: &[f64], label: usize, probs: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (p, &l) in probs.iter_mut().zip(logits) {
        *p = math::exp(l - max);
        z += *p;
    }
    for p in probs.iter_mut() {
        *p /= z;
    }
    // -log softmax(label)
    max + math::ln(z) - logits[label]
}

/// Per-layer `(offset, fan_in, fan_out)` into the flat parameter vector.
fn layer_spans(widths: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut off = 0;
    widths
        .windows(2)
        .map(|w| {
            let span = (off, w[0], w[1]);
            off += w[0] * w[1] + w[1];
            span
        })
        .collect()
}

impl Model {
    pub fn zeros(arch: Architecture, inputs: usize, classes: usize) -> Self {
        Self {
            arch,
            inputs,
            classes,
            params: ParamVec::zeros(arch.param_count(inputs, classes)),
        }
    }

    /// Parameters drawn i.i.d. from `N(0, std²)`.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, inputs: usize, classes: usize, std: f64, rng: &mut R) -> Self {
        let d = arch.param_count(inputs, classes);
        let params = (0..d).map(|_| normal(rng, 0.0, std)).collect();
        Self {
            arch,
            inputs,
            classes,
            params: ParamVec::from_raw(params),
        }
    }

    pub fn from_params(arch: Architecture, inputs: usize, classes: usize, params: ParamVec) -> Result<Self> {
        let d = arch.param_count(inputs, classes);
        if params.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: params.dim(),
            });
        }
        Ok(Self {
            arch,
            inputs,
            classes,
            params,
        })
    }

    /// Same architecture with different parameters.
    pub fn with_params(&self, params: ParamVec) -> Result<Self> {
        Self::from_params(self.arch, self.inputs, self.classes, params)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &ParamVec {
        &self.params
    }

    pub fn into_params(self) -> ParamVec {
        self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        self.params.as_mut_slice()
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                got: data.dim(),
            });
        }
        if data.num_classes() != self.classes {
            return Err(Error::Precondition(format!(
                "model has {} classes, dataset has {}",
                self.classes,
                data.num_classes()
            )));
        }
        Ok(())
    }

    /// Forward pass. `acts[l]` receives the input of layer `l`; the last
    /// entry holds the logits.
    fn forward(&self, spans: &[(usize, usize, usize)], x: &[f64], acts: &mut Vec<Vec<f64>>) {
        let w = self.params.as_slice();
        acts.resize(spans.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = spans.len() - 1;
        for (l, &(off, fan_in, fan_out)) in spans.iter().enumerate() {
            let (weights, bias) = w[off..off + fan_in * fan_out + fan_out].split_at(fan_in * fan_out);
            let (done, rest) = acts.split_at_mut(l + 1);
            let input = &done[l];
            let out = &mut rest[0];
            out.clear();
            out.extend((0..fan_out).map(|k| {
                let row = &weights[k * fan_in..(k + 1) * fan_in];
                let z = bias[k] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                if l == last {
                    z
                } else {
                    math::tanh(z)
                }
            }));
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let spans = layer_spans(&self.arch.widths(self.inputs, self.classes));
        let mut acts = Vec::new();
        self.forward(&spans, x, &mut acts);
        acts.pop().unwrap_or_default()
    }

    /// Argmax class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate().skip(1) {
            if v > logits[best] {
                best = k;
            }
        }
        best
    }

    /// Mean cross-entropy over the rows of `data` at `batch`, and its
    /// exact gradient.
    pub fn loss_and_grad(&self, data: &Dataset, batch: &[usize]) -> Result<(f64, ParamVec)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        self.check_data(data)?;
        if let Some(&bad) = batch.iter().find(|&&i| i >= data.len()) {
            return Err(Error::Precondition(format!(
                "sample index {bad} out of range for {} samples",
                data.len()
            )));
        }
        let spans = layer_spans(&self.arch.widths(self.inputs, self.classes));
        let w = self.params.as_slice();
        let mut grad = vec![0.0; self.params.dim()];
        let mut acts = Vec::new();
        let mut probs = vec![0.0; self.classes];
        let mut delta = Vec::new();
        let mut back = Vec::new();
        let mut loss = 0.0;

        for &i in batch {
            let y = data.label(i);
            self.forward(&spans, data.sample(i), &mut acts);
            loss += log_softmax_terms(&acts[spans.len()], y, &mut probs);
            // dL/dlogits = softmax - onehot
            probs[y] -= 1.0;
            delta.clear();
            delta.extend_from_slice(&probs);
            for (l, &(off, fan_in, fan_out)) in spans.iter().enumerate().rev() {
                let input = &acts[l];
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for k in 0..fan_out {
                    gb[k] += delta[k];
                    for (g, a) in gw[k * fan_in..(k + 1) * fan_in].iter_mut().zip(input) {
                        *g += delta[k] * a;
                    }
                }
                if l > 0 {
                    let weights = &w[off..off + fan_in * fan_out];
                    back.clear();
                    back.extend((0..fan_in).map(|j| {
                        let s: f64 = (0..fan_out).map(|k| delta[k] * weights[k * fan_in + j]).sum();
                        s * (1.0 - input[j] * input[j])
                    }));
                    core::mem::swap(&mut delta, &mut back);
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        Ok((loss * scale, ParamVec::from_raw(grad)))
    }

    /// Mean cross-entropy over the whole dataset.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        let all: Vec<usize> = (0..data.len()).collect();
        Ok(self.loss_and_grad(data, &all)?.0)
    }
}

/// Fraction of `test` rows whose argmax prediction equals the label.
pub fn evaluate_accuracy(model: &Model, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    model.check_data(test)?;
    let correct = (0..test.len())
        .filter(|&i| model.predict(test.sample(i)) == test.label(i))
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Convenience wrapper over [`Model::loss_and_grad`].
pub fn loss_and_grad(model: &Model, data: &Dataset, batch: &[usize]) -> Result<(f64, ParamVec)> {
    model.loss_and_grad(data, batch)
}
