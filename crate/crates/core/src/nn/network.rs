use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::tensor::{accumulate_weight_grads, affine, backprop_input};
use super::{NnError, Tensor2D};
use crate::activation::ActivationKind;
use crate::dataset::Targets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// Logits followed by softmax cross-entropy against class labels.
    Softmax,
    /// Identity output with mean squared error, for regression.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitRule {
    /// Weights ~ N(0, 2 / fan_in), biases zero.
    #[default]
    HeNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// Input size, hidden sizes..., output size.
    pub layer_sizes: Vec<usize>,
    /// Used by every hidden layer. The output layer is affine.
    pub activation: ActivationKind,
    pub output: OutputKind,
    pub init: InitRule,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: ActivationKind, output: OutputKind, seed: u64) -> Self {
        NetworkSpec {
            layer_sizes,
            activation,
            output,
            init: InitRule::HeNormal,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_sizes.len() < 2 {
            return Err(NnError::InvalidSpec("need at least an input and an output size".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(NnError::InvalidSpec(format!("zero-width layer in {:?}", self.layer_sizes)));
        }
        if let Some(a) = self.activation.trainable_param() {
            if !a.is_finite() {
                return Err(NnError::InvalidSpec(format!("non-finite initial slope {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerSlot {
    in_dim: usize,
    out_dim: usize,
    weights: Range<usize>,
    biases: Range<usize>,
}

/// Where each parameter group sits in the flat parameter vector.
#[derive(Debug, PartialEq)]
struct Layout {
    layers: Vec<LayerSlot>,
    /// One entry per hidden layer; `Some(i)` if that layer owns a trainable slope at index `i`.
    alphas: Vec<Option<usize>>,
    len: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Layout {
        let mut offset = 0;
        let mut layers = vec![];
        for pair in spec.layer_sizes.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let weights = offset..offset + in_dim * out_dim;
            let biases = weights.end..weights.end + out_dim;
            offset = biases.end;
            layers.push(LayerSlot {
                in_dim,
                out_dim,
                weights,
                biases,
            });
        }
        let hidden = layers.len() - 1;
        let mut alphas = vec![];
        for _ in 0..hidden {
            if spec.activation.trainable_param().is_some() {
                alphas.push(Some(offset));
                offset += 1;
            } else {
                alphas.push(None);
            }
        }
        Layout {
            layers,
            alphas,
            len: offset,
        }
    }
}

/// A fully connected network whose parameters live in one flat vector:
/// per layer the `out x in` weight matrix then the biases, followed by one
/// slope per hidden layer when the activation is trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Arc<Layout>,
    params: Vec<f64>,
}

/// Gradient of the loss, laid out like [`Network::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

pub fn init_network(spec: &NetworkSpec) -> Result<Network, NnError> {
    spec.validate()?;
    let layout = Arc::new(Layout::new(spec));
    let mut params = vec![0.0; layout.len];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.init {
        InitRule::HeNormal => {
            for slot in &layout.layers {
                let std = (2.0 / slot.in_dim as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                for w in &mut params[slot.weights.clone()] {
                    *w = rng.sample(normal);
                }
            }
        }
    }
    if let Some(a0) = spec.activation.trainable_param() {
        for i in layout.alphas.iter().flatten() {
            params[*i] = a0;
        }
    }
    Ok(Network {
        spec: spec.clone(),
        layout,
        params,
    })
}

struct Trace {
    /// Input of every layer; `inputs[0]` is the batch.
    inputs: Vec<Tensor2D>,
    d_dx: Vec<Vec<f64>>,
    d_dalpha: Vec<Vec<f64>>,
    output: Tensor2D,
}

pub(crate) struct BatchOutcome {
    pub loss: f64,
    pub correct: Option<usize>,
    pub gradients: Option<Gradients>,
}

impl Network {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_size(&self) -> usize {
        self.spec.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.spec.layer_sizes.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.layout.layers.len()
    }

    pub fn hidden_count(&self) -> usize {
        self.layout.alphas.len()
    }

    /// Weight matrix of layer `l`, row-major `out x in`.
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.params[self.layout.layers[l].weights.clone()]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.params[self.layout.layers[l].biases.clone()]
    }

    /// Trainable slope of hidden layer `h`, if any.
    pub fn alpha(&self, h: usize) -> Option<f64> {
        self.layout.alphas[h].map(|i| self.params[i])
    }

    /// Slopes of all hidden layers that have one, in layer order.
    pub fn alphas(&self) -> Vec<f64> {
        self.layout.alphas.iter().flatten().map(|&i| self.params[i]).collect()
    }

    /// Indices of the hidden layers that own a trainable slope.
    pub fn alpha_layers(&self) -> Vec<usize> {
        (0..self.hidden_count())
            .filter(|&h| self.layout.alphas[h].is_some())
            .collect()
    }

    /// Activation of hidden layer `h` with its current slope.
    pub fn hidden_activation(&self, h: usize) -> ActivationKind {
        let mut act = self.spec.activation;
        if let Some(a) = self.alpha(h) {
            act.set_trainable_param(a);
        }
        act
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), NnError> {
        if values.len() != self.params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                values.len()
            )));
        }
        self.params.copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mask over the flat parameters marking weight-matrix entries.
    pub(crate) fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.params.len()];
        for slot in &self.layout.layers {
            mask[slot.weights.clone()].fill(true);
        }
        mask
    }

    /// Network output for a batch: logits for softmax nets, predictions for linear ones.
    pub fn forward(&self, batch: &Tensor2D) -> Result<Tensor2D, NnError> {
        self.check_batch(batch)?;
        Ok(self.run(batch, false).output)
    }

    fn check_batch(&self, batch: &Tensor2D) -> Result<(), NnError> {
        if batch.cols() != self.input_size() {
            return Err(NnError::ShapeMismatch(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_size()
            )));
        }
        Ok(())
    }

    fn run(&self, batch: &Tensor2D, keep: bool) -> Trace {
        let layers = &self.layout.layers;
        let mut inputs = Vec::with_capacity(layers.len());
        let mut d_dx = vec![];
        let mut d_dalpha = vec![];
        let mut current = batch.clone();
        for (l, slot) in layers.iter().enumerate() {
            let mut z = affine(
                &current,
                &self.params[slot.weights.clone()],
                &self.params[slot.biases.clone()],
            );
            if l + 1 < layers.len() {
                let act = self.hidden_activation(l);
                let trainable = act.trainable_param().is_some();
                let mut dx = if keep { Vec::with_capacity(z.data().len()) } else { vec![] };
                let mut da = if keep && trainable {
                    Vec::with_capacity(z.data().len())
                } else {
                    vec![]
                };
                for v in z.data_mut() {
                    let e = act.eval(*v);
                    *v = e.value;
                    if keep {
                        dx.push(e.d_dx);
                        if trainable {
                            da.push(e.d_dalpha);
                        }
                    }
                }
                d_dx.push(dx);
                d_dalpha.push(da);
            }
            if keep {
                inputs.push(current);
            }
            current = z;
        }
        Trace {
            inputs,
            d_dx,
            d_dalpha,
            output: current,
        }
    }

    /// Summed loss over the batch, correct-prediction count and, if
    /// requested, gradients of the mean loss.
    pub(crate) fn batch_outcome(&self, batch: &Tensor2D, targets: &Targets, grads: bool) -> Result<BatchOutcome, NnError> {
        self.check_batch(batch)?;
        self.check_targets(targets, batch.rows())?;
        let trace = self.run(batch, grads);
        let (loss, correct, delta) = loss_terms(&trace.output, targets, grads);
        let gradients = if grads { Some(self.backward(&trace, delta)) } else { None };
        Ok(BatchOutcome {
            loss,
            correct,
            gradients,
        })
    }

    fn check_targets(&self, targets: &Targets, rows: usize) -> Result<(), NnError> {
        let out = self.output_size();
        match (self.spec.output, targets) {
            (OutputKind::Softmax, Targets::Classes { labels, .. }) => {
                if labels.len() != rows {
                    return Err(NnError::ShapeMismatch(format!("{} labels for {rows} samples", labels.len())));
                }
                if let Some(&label) = labels.iter().find(|&&l| l >= out) {
                    return Err(NnError::LabelOutOfRange { label, classes: out });
                }
            }
            (OutputKind::Linear, Targets::Values(values)) => {
                if values.len() != rows * out {
                    return Err(NnError::ShapeMismatch(format!(
                        "{} targets for {rows} samples of {out} outputs",
                        values.len()
                    )));
                }
            }
            (OutputKind::Softmax, Targets::Values(_)) => {
                return Err(NnError::ShapeMismatch("softmax output needs class labels".into()))
            }
            (OutputKind::Linear, Targets::Classes { .. }) => {
                return Err(NnError::ShapeMismatch("linear output needs real-valued targets".into()))
            }
        }
        Ok(())
    }

    fn backward(&self, trace: &Trace, mut delta: Tensor2D) -> Gradients {
        let mut data = vec![0.0; self.layout.len];
        for (l, slot) in self.layout.layers.iter().enumerate().rev() {
            let input = &trace.inputs[l];
            let (head, tail) = data.split_at_mut(slot.biases.start);
            accumulate_weight_grads(&delta, input, &mut head[slot.weights.clone()], &mut tail[..slot.out_dim]);
            if l == 0 {
                break;
            }
            let h = l - 1;
            let mut upstream = backprop_input(&delta, &self.params[slot.weights.clone()], slot.in_dim);
            if let Some(i) = self.layout.alphas[h] {
                let mut g = 0.0;
                for (u, da) in upstream.data().iter().zip(&trace.d_dalpha[h]) {
                    g += u * da;
                }
                data[i] = g;
            }
            for (u, dx) in upstream.data_mut().iter_mut().zip(&trace.d_dx[h]) {
                *u *= dx;
            }
            delta = upstream;
        }
        Gradients {
            layout: Arc::clone(&self.layout),
            data,
        }
    }
}

/// Summed loss, correct count, and the gradient of the mean loss with
/// respect to the network output.
fn loss_terms(output: &Tensor2D, targets: &Targets, want_delta: bool) -> (f64, Option<usize>, Tensor2D) {
    let rows = output.rows();
    let cols = output.cols();
    let scale = 1.0 / rows.max(1) as f64;
    let mut delta = if want_delta {
        Tensor2D::zeros(rows, cols)
    } else {
        Tensor2D::zeros(0, cols)
    };
    let mut loss = 0.0;
    match targets {
        Targets::Classes { labels, .. } => {
            let mut correct = 0;
            let mut probs = vec![0.0; cols];
            for (r, &label) in labels.iter().enumerate().take(rows) {
                let z = output.row(r);
                if argmax(z) == label {
                    correct += 1;
                }
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for (p, &v) in probs.iter_mut().zip(z) {
                    *p = (v - m).exp();
                    s += *p;
                }
                loss += s.ln() - (z[label] - m);
                if want_delta {
                    let d = delta.row_mut(r);
                    for c in 0..cols {
                        d[c] = probs[c] / s * scale;
                    }
                    d[label] -= scale;
                }
            }
            (loss, Some(correct), delta)
        }
        Targets::Values(values) => {
            let per = 1.0 / cols as f64;
            for r in 0..rows {
                let y = output.row(r);
                let t = &values[r * cols..(r + 1) * cols];
                let mut sq = 0.0;
                for c in 0..cols {
                    let e = y[c] - t[c];
                    sq += e * e;
                }
                loss += sq * per;
                if want_delta {
                    let d = delta.row_mut(r);
                    for c in 0..cols {
                        d[c] = 2.0 * (y[c] - t[c]) * per * scale;
                    }
                }
            }
            (loss, None, delta)
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean loss of `net` on the batch and its gradient.
pub fn forward_backward(net: &Network, batch: &Tensor2D, targets: &Targets) -> Result<(f64, Gradients), NnError> {
    let out = net.batch_outcome(batch, targets, true)?;
    let n = batch.rows().max(1) as f64;
    Ok((out.loss / n, out.gradients.expect("gradients requested")))
}

impl Gradients {
    pub fn flatten(&self) -> &[f64] {
        &self.data
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.data[self.layout.layers[l].weights.clone()]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.data[self.layout.layers[l].biases.clone()]
    }

    pub fn alpha(&self, h: usize) -> Option<f64> {
        self.layout.alphas[h].map(|i| self.data[i])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|g| g.is_finite())
    }
}
