//! Dense feedforward networks trained by mini-batch backpropagation.
//!
//! Each layer computes `a = f(W p + b)`. Training is plain gradient
//! descent on the mean per-sample loss of a mini-batch:
//!
//! ```text
//! W(k+1) = W(k) - alpha * dF/dW
//! b(k+1) = b(k) - alpha * dF/db
//! ```
//!
//! with `F = sum_j (t_j - a_j)^2` (squared error summed over outputs) or
//! `F = -sum_j t_j ln a_j` (categorical cross-entropy on the raw outputs).

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Probability clamp for the cross-entropy logarithm.
pub const CE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// f'(z) expressed through the output a = f(z).
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    MeanSquare,
    CrossEntropy,
}

/// Per-sample loss. Squared error is summed over outputs (not averaged).
pub fn loss(pred: &[f64], target: &[f64], kind: LossKind) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::arity(target.len(), pred.len()));
    }
    Ok(loss_unchecked(pred, target, kind))
}

fn loss_unchecked(pred: &[f64], target: &[f64], kind: LossKind) -> f64 {
    match kind {
        LossKind::MeanSquare => pred.iter().zip(target).map(|(a, t)| (t - a) * (t - a)).sum(),
        LossKind::CrossEntropy => pred
            .iter()
            .zip(target)
            .map(|(&a, &t)| -t * a.clamp(CE_EPSILON, 1.0 - CE_EPSILON).ln())
            .sum(),
    }
}

/// dF/da written into `out`.
fn loss_gradient(pred: &[f64], target: &[f64], kind: LossKind, out: &mut [f64]) {
    match kind {
        LossKind::MeanSquare => {
            for ((o, &a), &t) in out.iter_mut().zip(pred).zip(target) {
                *o = 2.0 * (a - t);
            }
        }
        LossKind::CrossEntropy => {
            for ((o, &a), &t) in out.iter_mut().zip(pred).zip(target) {
                // the clamp is flat outside [eps, 1 - eps]
                *o = if a > CE_EPSILON && a < 1.0 - CE_EPSILON {
                    -t / a
                } else {
                    0.0
                };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `fan_out x fan_in`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(fan_in: usize, fan_out: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::BadTopology("layer sizes must be positive".into()));
        }
        if weights.len() != fan_in * fan_out || bias.len() != fan_out {
            return Err(Error::BadTopology(format!(
                "layer {fan_in}->{fan_out} needs {} weights and {fan_out} biases, got {} and {}",
                fan_in * fan_out,
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::BadTopology("non-finite parameter".into()));
        }
        Ok(Layer {
            fan_in,
            fan_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights[j * self.fan_in..(j + 1) * self.fan_in];
            let z = self.bias[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            *o = self.activation.apply(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Uniform fan-based initialization in +-sqrt(6 / (fan_in + fan_out)),
    /// zero biases. `activations[l]` applies to layer `l + 1`.
    pub fn new(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::BadTopology("at least an input and an output layer are required".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::BadTopology("layer sizes must be positive".into()));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::BadTopology(format!(
                "{} weight layers need {} activations, got {}",
                layer_sizes.len() - 1,
                layer_sizes.len() - 1,
                activations.len()
            )));
        }
        let mut rng = seed::rng(seed);
        let layers = layer_sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
                Layer {
                    fan_in,
                    fan_out,
                    weights,
                    bias: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        Ok(Network { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::BadTopology("no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::BadTopology(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].fan_out, pair[1].fan_in
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_size())
            .chain(self.layers.iter().map(|l| l.fan_out))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Splits into the first `n` layers and the rest.
    pub fn split(mut self, n: usize) -> Result<(Network, Network)> {
        if n == 0 || n >= self.layers.len() {
            return Err(Error::BadTopology(format!(
                "cannot split {} layers at {n}",
                self.layers.len()
            )));
        }
        let tail = self.layers.split_off(n);
        Ok((self, Network { layers: tail }))
    }

    fn check_input(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.input_size() {
            return Err(Error::arity(self.input_size(), p.len()));
        }
        Ok(())
    }

    /// Activations of every layer after the input; the last entry is the
    /// network output.
    pub fn forward(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(p)?;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.fan_out];
            let input = if l == 0 { p } else { &acts[l - 1] };
            layer.forward_into(input, &mut out);
            acts.push(out);
        }
        Ok(acts)
    }

    /// Raw output-layer activations.
    pub fn predict_proba(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(p)?.pop().expect("at least one layer"))
    }

    pub fn predict_class(&self, p: &[f64]) -> Result<usize> {
        Ok(crate::ingest::argmax(&self.predict_proba(p)?))
    }

    /// Gradient of the mean batch loss with respect to every parameter.
    pub fn backward<X: AsRef<[f64]>, Y: AsRef<[f64]>>(
        &self,
        inputs: &[X],
        targets: &[Y],
        kind: LossKind,
    ) -> Result<Gradients> {
        self.check_batch(inputs, targets)?;
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut scratch = Scratch::new(self);
        let order: Vec<usize> = (0..inputs.len()).collect();
        scratch.accumulate(self, inputs, targets, &order, kind);
        let mut grads = scratch.grads;
        grads.scale(1.0 / inputs.len() as f64);
        Ok(grads)
    }

    /// `param -= lr * grad` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }

    fn check_batch<X: AsRef<[f64]>, Y: AsRef<[f64]>>(&self, inputs: &[X], targets: &[Y]) -> Result<()> {
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: targets.len(),
            });
        }
        for (x, t) in inputs.iter().zip(targets) {
            self.check_input(x.as_ref())?;
            if t.as_ref().len() != self.output_size() {
                return Err(Error::arity(self.output_size(), t.as_ref().len()));
            }
        }
        Ok(())
    }

    /// Mean per-sample loss over a dataset.
    pub fn mean_loss<X: AsRef<[f64]>, Y: AsRef<[f64]>>(&self, inputs: &[X], targets: &[Y], kind: LossKind) -> Result<f64> {
        self.check_batch(inputs, targets)?;
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut scratch = Scratch::new(self);
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                scratch.forward(self, x.as_ref());
                loss_unchecked(scratch.output(), t.as_ref(), kind)
            })
            .sum();
        Ok(total / inputs.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    fn zeros(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    fn reset(&mut self) {
        for g in &mut self.layers {
            g.weights.fill(0.0);
            g.bias.fill(0.0);
        }
    }

    fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            g.weights.iter_mut().chain(g.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

/// Reusable per-sample buffers for forward/backward passes.
struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    grads: Gradients,
    loss_sum: f64,
}

impl Scratch {
    fn new(net: &Network) -> Self {
        Scratch {
            acts: net.layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            deltas: net.layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            grads: Gradients::zeros(net),
            loss_sum: 0.0,
        }
    }

    fn forward(&mut self, net: &Network, p: &[f64]) {
        for (l, layer) in net.layers.iter().enumerate() {
            let (done, rest) = self.acts.split_at_mut(l);
            let input = if l == 0 { p } else { &done[l - 1] };
            layer.forward_into(input, &mut rest[0]);
        }
    }

    fn output(&self) -> &[f64] {
        &self.acts[self.acts.len() - 1]
    }

    /// Adds the summed (not averaged) gradients of `order`'s samples.
    fn accumulate<X: AsRef<[f64]>, Y: AsRef<[f64]>>(
        &mut self,
        net: &Network,
        inputs: &[X],
        targets: &[Y],
        order: &[usize],
        kind: LossKind,
    ) {
        let last = net.layers.len() - 1;
        for &i in order {
            let p = inputs[i].as_ref();
            let t = targets[i].as_ref();
            self.forward(net, p);
            self.loss_sum += loss_unchecked(&self.acts[last], t, kind);

            loss_gradient(&self.acts[last], t, kind, &mut self.deltas[last]);
            let act = net.layers[last].activation;
            for (d, &a) in self.deltas[last].iter_mut().zip(&self.acts[last]) {
                *d *= act.derivative_from_output(a);
            }

            for l in (0..=last).rev() {
                let layer = &net.layers[l];
                let input = if l == 0 { p } else { &self.acts[l - 1] };
                let g = &mut self.grads.layers[l];
                let delta = &self.deltas[l];
                for (j, &dj) in delta.iter().enumerate() {
                    g.bias[j] += dj;
                    let row = &mut g.weights[j * layer.fan_in..(j + 1) * layer.fan_in];
                    for (gw, &x) in row.iter_mut().zip(input) {
                        *gw += dj * x;
                    }
                }
                if l > 0 {
                    let (lower, upper) = self.deltas.split_at_mut(l);
                    let below = &mut lower[l - 1];
                    below.fill(0.0);
                    for (j, &dj) in upper[0].iter().enumerate() {
                        let row = &layer.weights[j * layer.fan_in..(j + 1) * layer.fan_in];
                        for (b, &w) in below.iter_mut().zip(row) {
                            *b += w * dj;
                        }
                    }
                    let act = net.layers[l - 1].activation;
                    for (b, &a) in below.iter_mut().zip(&self.acts[l - 1]) {
                        *b *= act.derivative_from_output(a);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 64,
            loss: LossKind::MeanSquare,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::BadConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::BadConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mini-batch SGD. Data is reshuffled every epoch from a single seeded
/// stream; the final partial batch is trained. Returns the mean per-sample
/// loss of each epoch (measured before each batch's update).
pub fn train<X: AsRef<[f64]>, Y: AsRef<[f64]>>(
    mut net: Network,
    inputs: &[X],
    targets: &[Y],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<f64>)> {
    cfg.validate()?;
    net.check_batch(inputs, targets)?;
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut scratch = Scratch::new(&net);
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        scratch.loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            scratch.grads.reset();
            scratch.accumulate(&net, inputs, targets, batch, cfg.loss);
            let lr = cfg.learning_rate / batch.len() as f64;
            net.apply_gradients(&scratch.grads, lr);
        }
        history.push(scratch.loss_sum / inputs.len() as f64);
    }
    Ok((net, history))
}
