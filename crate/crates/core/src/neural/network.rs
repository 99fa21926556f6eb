//! Fully connected Q-value approximator with ReLU hidden layers and a linear
//! output layer, trained by backpropagation.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(
            |(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>(),
        ));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Gradient of the loss with the same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g *= k);
        }
    }
}

/// One supervised example: push output `action` of `input` towards `target`.
#[derive(Debug, Clone, Copy)]
pub struct Regression<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

impl QNetwork {
    /// All-zero network with the given layer sizes (input first).
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output layer");
        QNetwork {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// He-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::contract(format!("layer {i} has inconsistent shapes")));
            }
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::contract("consecutive layer sizes do not chain"));
            }
        }
        Ok(QNetwork { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_size())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Q-values for `state`.
    pub fn forward(&self, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.input_size(), "state dimension mismatch");
        let mut cur = state.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Post-activation outputs of every layer, input first.
    fn activations(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(state.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.affine(acts.last().expect("input"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over `batch` and its gradient with respect to every
    /// parameter. Only the selected output of each example contributes.
    pub fn loss_and_gradient(&self, batch: &[Regression<'_>]) -> (f64, Gradients) {
        let mut grads = Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        };
        if batch.is_empty() {
            return (0.0, grads);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for ex in batch {
            let acts = self.activations(ex.input);
            let q = acts.last().expect("output")[ex.action];
            let err = q - ex.target;
            loss += err * err * scale;

            // d loss / d output
            let mut delta = vec![0.0; self.output_size()];
            delta[ex.action] = 2.0 * err * scale;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grads.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(gw, x)| *gw += d * x);
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
                // ReLU derivative of the hidden layer feeding this one.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        (loss, grads)
    }

    pub fn loss(&self, batch: &[Regression<'_>]) -> f64 {
        let scale = 1.0 / batch.len().max(1) as f64;
        batch
            .iter()
            .map(|ex| {
                let e = self.forward(ex.input)[ex.action] - ex.target;
                e * e * scale
            })
            .sum()
    }

    /// Plain gradient-descent step. With `max_norm`, the gradient is first
    /// rescaled so its global L2 norm does not exceed it.
    pub fn apply_gradients(&mut self, mut grads: Gradients, learning_rate: f64, max_norm: Option<f64>) {
        if let Some(limit) = max_norm {
            let norm = grads.norm();
            if norm > limit {
                grads.scale(limit / norm);
            }
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer
                .weights
                .iter_mut()
                .zip(&g.weights)
                .for_each(|(w, d)| *w -= learning_rate * d);
            layer
                .biases
                .iter_mut()
                .zip(&g.biases)
                .for_each(|(b, d)| *b -= learning_rate * d);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .all(|v| v.is_finite())
    }

    /// Checkpoint bytes: `u32` count of layer sizes, the sizes as `u32`, then
    /// for each layer its row-major weights followed by its biases as `f64`.
    /// All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.layer_sizes();
        let mut out = Vec::with_capacity(4 * (sizes.len() + 1) + 8 * self.parameter_count());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in &sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |d: &str| Error::format("checkpoint", d);
        let mut pos = 0usize;
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            let chunk = bytes.get(*pos..*pos + 4).ok_or_else(|| bad("truncated header"))?;
            *pos += 4;
            Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")))
        };
        let count = read_u32(&mut pos)? as usize;
        if !(2..=64).contains(&count) {
            return Err(bad("implausible layer count"));
        }
        let sizes = (0..count)
            .map(|_| read_u32(&mut pos).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if sizes.contains(&0) {
            return Err(bad("zero-width layer"));
        }
        let mut net = Self::zeros(&sizes);
        let expected = pos + 8 * net.parameter_count();
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
        }
        for l in &mut net.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = f64::from_le_bytes(bytes[pos..pos + 8].try_into().expect("8 bytes"));
                pos += 8;
            }
        }
        Ok(net)
    }
}
