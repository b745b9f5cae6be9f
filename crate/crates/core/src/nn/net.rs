use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::loss::{grouped_loss, hot_indices, LossKind};
use crate::error::{dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OutputHead {
    Linear,
    /// Softmax over `groups` equal-width segments of the output.
    Simplex {
        groups: usize,
    },
}

/// Dense network. All parameters live in one flat buffer: for each layer the
/// row-major `(out, in)` weight matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    head: OutputHead,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Post-activation values of every layer (index 0 is the input).
pub(crate) struct Trace {
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    offsets.push(0);
    for pair in sizes.windows(2) {
        acc += pair[0] * pair[1] + pair[1];
        offsets.push(acc);
    }
    offsets
}

impl DenseNet {
    /// Network with all weights and biases zero.
    pub fn zeros(sizes: &[usize], head: OutputHead) -> Result<Self> {
        validate_shape(sizes, head)?;
        let offsets = layer_offsets(sizes);
        let total = *offsets.last().unwrap_or(&0);
        Ok(Self {
            sizes: sizes.to_vec(),
            head,
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], head: OutputHead, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, head)?;
        for layer in 0..net.layer_count() {
            let (fan_in, fan_out) = (net.sizes[layer], net.sizes[layer + 1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let dist = Uniform::new_inclusive(-limit, limit);
            let start = net.offsets[layer];
            for w in &mut net.params[start..start + fan_in * fan_out] {
                *w = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub(crate) fn from_raw(sizes: Vec<usize>, head: OutputHead, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(&sizes, head)?;
        dim("parameter count", net.params.len(), params.len())?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap_or(&0)
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight matrix (row-major, `out × in`) of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let start = self.offsets[l];
        &self.params[start..start + self.sizes[l] * self.sizes[l + 1]]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let start = self.offsets[l] + self.sizes[l] * self.sizes[l + 1];
        &self.params[start..start + self.sizes[l + 1]]
    }

    fn groups(&self) -> usize {
        match self.head {
            OutputHead::Linear => 1,
            OutputHead::Simplex { groups } => groups,
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.activations.pop().unwrap_or_default())
    }

    pub(crate) fn trace(&self, input: &[f64]) -> Result<Trace> {
        dim("network input", self.input_len(), input.len())?;
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let last = self.layer_count() - 1;
        for l in 0..=last {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = self.weights(l);
            let b = self.biases(l);
            let x = &activations[l];
            let mut z = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(x) {
                    acc += wi * xi;
                }
                z.push(acc);
            }
            if l < last {
                for v in &mut z {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            } else if let OutputHead::Simplex { groups } = self.head {
                softmax_groups(&mut z, groups);
            }
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    /// Loss of this network's prediction for `input` against `target`.
    pub fn loss(&self, input: &[f64], target: &[f64], kind: LossKind) -> Result<f64> {
        check_kind(self.head, kind)?;
        let out = self.forward(input)?;
        grouped_loss(kind, &out, target, self.groups())
    }

    /// Adds the gradient of the per-sample loss, scaled by `scale`, into
    /// `grads` (same layout as [`DenseNet::params`]). Returns the loss.
    pub(crate) fn accumulate_gradient(
        &self,
        input: &[f64],
        target: &[f64],
        kind: LossKind,
        scale: f64,
        grads: &mut [f64],
    ) -> Result<f64> {
        check_kind(self.head, kind)?;
        dim("gradient buffer", self.params.len(), grads.len())?;
        let trace = self.trace(input)?;
        let out = trace.output();
        dim("network target", out.len(), target.len())?;
        let groups = self.groups();
        let value = grouped_loss(kind, out, target, groups)?;

        // dL/dz for the output layer pre-activation.
        let n = out.len();
        let mut delta = vec![0.0; n];
        match (kind, self.head) {
            (LossKind::Mse, OutputHead::Linear) => {
                for i in 0..n {
                    delta[i] = 2.0 * (out[i] - target[i]) / n as f64;
                }
            }
            (LossKind::Mse, OutputHead::Simplex { groups }) => {
                let width = n / groups;
                for g in 0..groups {
                    let range = g * width..(g + 1) * width;
                    let dl: Vec<f64> = range
                        .clone()
                        .map(|i| 2.0 * (out[i] - target[i]) / n as f64)
                        .collect();
                    let dot: f64 = dl.iter().zip(&out[range.clone()]).map(|(a, p)| a * p).sum();
                    for (k, i) in range.enumerate() {
                        delta[i] = out[i] * (dl[k] - dot);
                    }
                }
            }
            (LossKind::Cce, OutputHead::Simplex { groups }) => {
                let width = n / groups;
                let hot: Vec<usize> = hot_indices(target, groups)?.collect();
                for g in 0..groups {
                    for k in 0..width {
                        let i = g * width + k;
                        let y = if hot[g] == k { 1.0 } else { 0.0 };
                        delta[i] = (out[i] - y) / groups as f64;
                    }
                }
            }
            (LossKind::Cce, OutputHead::Linear) => unreachable!("rejected by check_kind"),
        }

        for l in (0..self.layer_count()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let x = &trace.activations[l];
            let w_off = self.offsets[l];
            let b_off = w_off + n_in * n_out;
            for o in 0..n_out {
                let d = delta[o] * scale;
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                grads[b_off + o] += d;
            }
            if l > 0 {
                let w = self.weights(l);
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += wi * d;
                    }
                }
                // rectifier derivative, read from the post-activation value
                for (p, a) in prev.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(value)
    }
}

fn check_kind(head: OutputHead, kind: LossKind) -> Result<()> {
    if kind == LossKind::Cce && head == OutputHead::Linear {
        return Err(Error::Config(
            "categorical cross-entropy requires a probability-simplex head".into(),
        ));
    }
    Ok(())
}

fn validate_shape(sizes: &[usize], head: OutputHead) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {sizes:?}"
        )));
    }
    if let OutputHead::Simplex { groups } = head {
        let out = sizes[sizes.len() - 1];
        if groups == 0 || !out.is_multiple_of(groups) {
            return Err(Error::Config(format!(
                "output size {out} does not split into {groups} simplex groups"
            )));
        }
    }
    Ok(())
}

fn softmax_groups(z: &mut [f64], groups: usize) {
    let width = z.len() / groups;
    for chunk in z.chunks_mut(width) {
        let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in chunk.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in chunk.iter_mut() {
            *v /= sum;
        }
    }
}
