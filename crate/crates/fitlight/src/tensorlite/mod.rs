//! Minimal dense neural-network engine: three-layer MLPs with ReLU hidden
//! activations, exact manual backpropagation, Adam, and binary pruning masks
//! applied as an elementwise product with the parameters.
//!
//! Parameters are stored as one flat `f64` vector: for each layer, the weight
//! matrix in row-major order (`W[out][in]`) followed by the bias vector.
//! Masked entries are zero and stay zero through every update, as do their
//! optimizer moments.

mod checkpoint;
mod mask;

pub use checkpoint::{load_model, save_model};
pub use mask::{make_mask, Mask};

use rand::Rng;
use thiserror::Error;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("invalid pruning rates: {0}")]
    InvalidRates(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub fn new(inputs: usize, outputs: usize) -> LayerShape {
        LayerShape { inputs, outputs }
    }
}

/// Total parameter count (weights + biases) for a stack of layers.
pub fn param_len(shapes: &[LayerShape]) -> usize {
    shapes.iter().map(|s| s.inputs * s.outputs + s.outputs).sum()
}

/// Offset of layer `l`'s weight matrix in the flat parameter vector.
pub fn weight_offset(shapes: &[LayerShape], l: usize) -> usize {
    shapes[..l].iter().map(|s| s.inputs * s.outputs + s.outputs).sum()
}

/// Offset of layer `l`'s bias vector.
pub fn bias_offset(shapes: &[LayerShape], l: usize) -> usize {
    weight_offset(shapes, l) + shapes[l].inputs * shapes[l].outputs
}

/// Flat gradient aligned with a model's parameter layout. Entries at masked
/// positions are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub values: Vec<f64>,
}

impl GradientSet {
    pub fn zeros(len: usize) -> GradientSet {
        GradientSet { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Zeroes entries at masked positions.
    pub fn apply_mask(&mut self, mask: &Mask) {
        assert_eq!(self.values.len(), mask.len());
        for (v, &keep) in self.values.iter_mut().zip(mask.bits()) {
            if !keep {
                *v = 0.0;
            }
        }
    }

    pub fn respects_mask(&self, mask: &Mask) -> bool {
        self.values
            .iter()
            .zip(mask.bits())
            .all(|(&v, &keep)| keep || v == 0.0)
    }
}

/// Activations recorded by a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input; `acts[l + 1]` the post-activation of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
}

/// Adam state; moments at masked positions stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

/// An MLP with a binary pruning mask fused into its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedModel {
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
    mask: Mask,
    adam: AdamState,
}

impl MaskedModel {
    /// Wraps raw parameters with a mask; masked entries are zeroed.
    pub fn new(shapes: Vec<LayerShape>, mut params: Vec<f64>, mask: Mask) -> MaskedModel {
        assert_eq!(params.len(), param_len(&shapes), "parameter vector length");
        assert_eq!(mask.len(), params.len(), "mask length");
        assert_eq!(mask.shapes(), shapes.as_slice(), "mask shapes");
        for (p, &keep) in params.iter_mut().zip(mask.bits()) {
            if !keep {
                *p = 0.0;
            }
        }
        let n = params.len();
        MaskedModel {
            shapes,
            params,
            mask,
            adam: AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 },
        }
    }

    /// Fully dense model with Xavier-uniform weights and zero biases.
    pub fn dense(shapes: &[LayerShape], rng: &mut impl Rng) -> MaskedModel {
        let params = xavier_params(shapes, rng);
        MaskedModel::new(shapes.to_vec(), params, Mask::full(shapes))
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().unwrap().outputs
    }

    /// Overwrites parameters (test and provisioning plumbing); masked entries
    /// are re-zeroed and optimizer state is kept.
    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
        self.reapply_mask();
    }

    fn reapply_mask(&mut self) {
        for (p, &keep) in self.params.iter_mut().zip(self.mask.bits()) {
            if !keep {
                *p = 0.0;
            }
        }
    }

    pub(crate) fn restore(
        shapes: Vec<LayerShape>,
        params: Vec<f64>,
        mask: Mask,
        adam: AdamState,
    ) -> MaskedModel {
        let mut model = MaskedModel::new(shapes, params, mask);
        model.adam = adam;
        model
    }

    /// Forward pass: ReLU hidden layers, linear output. Returns the output
    /// vector and the activation cache for `backward`.
    pub fn forward(&self, input: &[f64]) -> (Vec<f64>, ForwardCache) {
        assert_eq!(input.len(), self.input_dim(), "input length");
        let n = self.shapes.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n);
        acts.push(input.to_vec());
        for l in 0..n {
            let shape = self.shapes[l];
            let w_off = weight_offset(&self.shapes, l);
            let b_off = bias_offset(&self.shapes, l);
            let prev = &acts[l];
            let mut z = vec![0.0; shape.outputs];
            for o in 0..shape.outputs {
                let row = &self.params[w_off + o * shape.inputs..w_off + (o + 1) * shape.inputs];
                let mut acc = self.params[b_off + o];
                for (w, x) in row.iter().zip(prev) {
                    acc += w * x;
                }
                z[o] = acc;
            }
            let a = if l + 1 < n { z.iter().map(|&x| x.max(0.0)).collect() } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        (acts[n].clone(), ForwardCache { acts, pre })
    }

    /// Exact gradients of a scalar loss given `d loss / d output`; masked
    /// positions are forced to zero.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> GradientSet {
        assert_eq!(output_grad.len(), self.output_dim(), "output gradient length");
        let n = self.shapes.len();
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = output_grad.to_vec();
        for l in (0..n).rev() {
            let shape = self.shapes[l];
            let w_off = weight_offset(&self.shapes, l);
            let b_off = bias_offset(&self.shapes, l);
            let prev = &cache.acts[l];
            for o in 0..shape.outputs {
                let d = delta[o];
                grad[b_off + o] = d;
                let row = &mut grad[w_off + o * shape.inputs..w_off + (o + 1) * shape.inputs];
                for (g, x) in row.iter_mut().zip(prev) {
                    *g = d * x;
                }
            }
            if l > 0 {
                let mut prev_delta = vec![0.0; shape.inputs];
                for o in 0..shape.outputs {
                    let d = delta[o];
                    let row =
                        &self.params[w_off + o * shape.inputs..w_off + (o + 1) * shape.inputs];
                    for (pd, w) in prev_delta.iter_mut().zip(row) {
                        *pd += d * w;
                    }
                }
                for (pd, &z) in prev_delta.iter_mut().zip(&cache.pre[l - 1]) {
                    if z <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
        let mut gs = GradientSet { values: grad };
        gs.apply_mask(&self.mask);
        gs
    }

    /// One Adam step at unmasked positions.
    pub fn adam_step(&mut self, grad: &GradientSet, lr: f64) {
        assert_eq!(grad.len(), self.params.len(), "gradient length");
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..self.params.len() {
            if !self.mask.retained(i) {
                continue;
            }
            let g = grad.values[i];
            let m = &mut self.adam.m[i];
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            let v = &mut self.adam.v[i];
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            self.params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Xavier-uniform weights, zero biases.
pub fn xavier_params(shapes: &[LayerShape], rng: &mut impl Rng) -> Vec<f64> {
    let mut params = vec![0.0; param_len(shapes)];
    for (l, shape) in shapes.iter().enumerate() {
        let bound = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
        let off = weight_offset(shapes, l);
        for w in params[off..off + shape.inputs * shape.outputs].iter_mut() {
            *w = rng.gen_range(-bound..bound);
        }
    }
    params
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - max - log_sum).collect()
}

#[cfg(test)]
mod tests;
