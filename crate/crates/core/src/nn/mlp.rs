use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output transform applied after the last affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Linear,
    Softmax,
    Sigmoid,
}

/// Dense layer. `weights` is `inputs x outputs`, row-major: row `i` holds
/// the outgoing weights of input `i`. Zero inputs are skipped, which keeps
/// one-hot grid encodings cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`; biases zero.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-a..=a)).collect();
        Self {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.outputs + output]
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.biases);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Feed-forward network: affine layers with ReLU between them and a
/// configurable head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    head: Head,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`]. `acts[0]` is
/// the input, `acts[l + 1]` the output of layer `l` (post-ReLU for hidden
/// layers, raw logits for the last), `output` the head applied to the logits.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub acts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradient buffers shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|g| *g *= k);
            l.biases.iter_mut().for_each(|g| *g *= k);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|&g| g == 0.0))
    }

    /// Flattened view in the same order as [`Mlp::params`].
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

impl Mlp {
    /// Randomly initialized network; `dims` lists input, hidden and output
    /// widths.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Layer::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self { layers, head })
    }

    pub fn zeros(dims: &[usize], head: Head) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Self { layers, head })
    }

    pub fn from_layers(layers: Vec<Layer>, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::InvalidInput(format!(
                    "layer {i} parameter shapes do not match {}x{}",
                    l.inputs, l.outputs
                )));
            }
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::InvalidInput(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs != w[1].inputs {
                return Err(Error::Dimension {
                    what: format!("layer {} input", i + 1),
                    expected: w[0].outputs,
                    actual: w[1].inputs,
                });
            }
        }
        let net = Self { layers, head };
        if !net.params().all(f64::is_finite) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(net)
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    /// Mutable access to the `k`-th parameter in [`Self::params`] order.
    pub fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.weights.len() {
                return &mut l.weights[k];
            }
            k -= l.weights.len();
            if k < l.biases.len() {
                return &mut l.biases[k];
            }
            k -= l.biases.len();
        }
        panic!("parameter index out of range")
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "network input".into(),
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)?;
        Ok(cache.output)
    }

    /// Forward pass that keeps every activation for [`Self::backward_cached`].
    /// The cache's buffers are reused across calls.
    pub fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) -> Result<()> {
        self.check_input(input)?;
        let n = self.layers.len();
        cache.acts.resize_with(n + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let out = &mut after[0];
            layer.forward_into(&before[l], out);
            if l + 1 < n {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        apply_head(self.head, &cache.acts[n], &mut cache.output);
        Ok(())
    }

    /// Accumulates parameter gradients into `grads` given the gradient of the
    /// loss with respect to the logits (the pre-head outputs).
    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        grad_logits: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        if grad_logits.len() != self.output_dim() {
            return Err(Error::Dimension {
                what: "upstream gradient".into(),
                expected: self.output_dim(),
                actual: grad_logits.len(),
            });
        }
        if cache.acts.len() != self.layers.len() + 1 || grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidInput(
                "forward cache or gradient buffer does not match the network".into(),
            ));
        }
        let mut dy = grad_logits.to_vec();
        let mut dx = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let x = &cache.acts[l];
            for (gb, d) in g.biases.iter_mut().zip(&dy) {
                *gb += d;
            }
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (gw, d) in row.iter_mut().zip(&dy) {
                    *gw += xi * d;
                }
            }
            if l == 0 {
                break;
            }
            // x is post-ReLU, so x > 0 exactly where the pre-activation was positive.
            dx.clear();
            dx.extend(x.iter().enumerate().map(|(i, &xi)| {
                if xi > 0.0 {
                    let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    row.iter().zip(&dy).map(|(w, d)| w * d).sum()
                } else {
                    0.0
                }
            }));
            std::mem::swap(&mut dx, &mut dy);
        }
        Ok(())
    }

    /// Gradients of a single example, given the upstream gradient with respect
    /// to the logits.
    pub fn backward(&self, input: &[f64], grad_logits: &[f64]) -> Result<Gradients> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)?;
        let mut grads = Gradients::zeros_like(self);
        self.backward_cached(&cache, grad_logits, &mut grads)?;
        Ok(grads)
    }

    /// Copy of this network accepting `extra` more inputs, whose weights are
    /// zero. Outputs on the original inputs are unchanged.
    pub fn widen_input(&self, extra: usize) -> Self {
        let mut out = self.clone();
        let first = &mut out.layers[0];
        first.inputs += extra;
        first
            .weights
            .extend(std::iter::repeat_n(0.0, extra * first.outputs));
        out
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidInput(
            "layer dims need at least input and output widths".into(),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidInput(format!("zero width in {dims:?}")));
    }
    Ok(())
}

pub(crate) fn apply_head(head: Head, logits: &[f64], out: &mut Vec<f64>) {
    out.clear();
    match head {
        Head::Linear => out.extend_from_slice(logits),
        Head::Softmax => softmax_into(logits, out),
        Head::Sigmoid => out.extend(logits.iter().map(|&z| sigmoid(z))),
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    softmax_into(logits, &mut out);
    out
}

fn softmax_into(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.extend(logits.iter().map(|&z| (z - max).exp()));
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
}
