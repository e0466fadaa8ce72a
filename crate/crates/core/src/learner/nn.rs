//! Small fully connected networks with tanh hidden layers and a linear
//! output layer. Batches are row-major `batch × features` slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations recorded by [`Mlp::forward_batch`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    batch: usize,
    /// `acts[0]` is the input; `acts[i]` the output of layer `i - 1`.
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// `c = a · bᵀ + c` with `a: m×k`, `b: n×k`, `c: m×n` (all row-major).
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = aᵀ · b + beta·c` with `a: m×k`, `b: m×n`, `c: k×n`.
fn gemm_atb(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            k,
            m,
            n,
            1.0,
            a.as_ptr(),
            1,
            k as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a · b` with `a: m×k`, `b: k×n`.
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Xavier-uniform weights, zero biases. The output layer is scaled by
    /// `output_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        assert!(
            sizes.len() >= 2,
            "an Mlp needs at least input and output sizes"
        );
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let mut layer = Dense::zeros(w[0], w[1]);
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let scale = if i + 1 == n { output_scale } else { 1.0 };
                for v in layer.weights.iter_mut() {
                    *v = rng.gen_range(-limit..limit) * scale;
                }
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    /// All parameters in a fixed order: per layer, weights then biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::usage(format!(
                "network expects {} inputs, got {}",
                self.input_size(),
                input.len()
            )));
        }
        let mut tape = Tape::default();
        self.forward_batch(input, 1, &mut tape);
        Ok(tape.output().to_vec())
    }

    /// Batched forward pass; the result is `tape.output()` (`batch × outputs`).
    pub fn forward_batch(&self, input: &[f64], batch: usize, tape: &mut Tape) {
        assert_eq!(
            input.len(),
            batch * self.input_size(),
            "input shape mismatch"
        );
        let n = self.layers.len();
        tape.batch = batch;
        tape.acts.resize_with(n + 1, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = tape.acts.split_at_mut(i + 1);
            let x = &done[i];
            let out = &mut rest[0];
            out.clear();
            for _ in 0..batch {
                out.extend_from_slice(&layer.biases);
            }
            gemm_abt(
                batch,
                layer.inputs,
                layer.outputs,
                x,
                &layer.weights,
                1.0,
                out,
            );
            if i + 1 < n {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    /// Backpropagates `grad_out` (`batch × outputs`, d loss / d output) through
    /// the recorded tape, accumulating parameter gradients into `grads`.
    pub fn backward(&self, tape: &Tape, grad_out: &[f64], grads: &mut Mlp) {
        let batch = tape.batch;
        let n = self.layers.len();
        let mut delta = grad_out.to_vec();
        let mut next = Vec::new();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let g = &mut grads.layers[i];
            let x = &tape.acts[i];
            gemm_atb(
                batch,
                layer.outputs,
                layer.inputs,
                &delta,
                x,
                1.0,
                &mut g.weights,
            );
            for row in delta.chunks_exact(layer.outputs) {
                for (b, d) in g.biases.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if i > 0 {
                next.resize(batch * layer.inputs, 0.0);
                gemm_ab(
                    batch,
                    layer.outputs,
                    layer.inputs,
                    &delta,
                    &layer.weights,
                    &mut next,
                );
                // previous activation is tanh output a; da/dz = 1 - a²
                for (d, a) in next.iter_mut().zip(x) {
                    *d *= 1.0 - a * a;
                }
                std::mem::swap(&mut delta, &mut next);
            }
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.params_mut().for_each(|p| *p = value);
    }

    pub fn norm(&self) -> f64 {
        self.params().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Parameterwise `t ← (1 − τ)·t + τ·o`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::usage(format!(
            "soft update shape mismatch: {:?} vs {:?}",
            target.sizes(),
            online.sizes()
        )));
    }
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Gradient step with global-norm clipping. Adam keeps its moment estimates here.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, clip_norm: f64, net: &Mlp) -> Self {
        let n = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => net.param_count(),
        };
        Self {
            kind,
            lr,
            clip_norm,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Applies one descent step; returns the pre-clip gradient norm.
    pub fn step(&mut self, net: &mut Mlp, grads: &Mlp) -> f64 {
        let norm = grads.norm();
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in net.params_mut().zip(grads.params()) {
                    *p -= self.lr * scale * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - Self::BETA1.powi(self.t);
                let bc2 = 1.0 - Self::BETA2.powi(self.t);
                for (((p, g), m), v) in net
                    .params_mut()
                    .zip(grads.params())
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    let g = g * scale;
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + Self::EPS);
                }
            }
        }
        norm
    }
}
