use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::arch::{Activation, AeArchitecture, LayerOp, LayerSpec};
use crate::error::{Error, Result};

/// An autoencoder: architecture plus its flat parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub arch: AeArchitecture,
    pub params: Vec<f64>,
    pub trained_epochs: usize,
    pub best_val_loss: Option<f64>,
    pub seed: u64,
}

impl AeModel {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn new(arch: AeArchitecture, seed: u64) -> Self {
        let mut params = vec![0.0; arch.n_params];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in arch.layers.iter().filter(|l| l.tied_to.is_none()) {
            let bound = 1.0 / (l.fan_in() as f64).sqrt();
            for w in &mut params[l.weights.range()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Self {
            arch,
            params,
            trained_epochs: 0,
            best_val_loss: None,
            seed,
        }
    }

    pub fn zeros(arch: AeArchitecture) -> Self {
        let params = vec![0.0; arch.n_params];
        Self {
            arch,
            params,
            trained_epochs: 0,
            best_val_loss: None,
            seed: 0,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        &self.params[self.arch.layers[layer].weights.range()]
    }

    pub fn layer_weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.arch.layers[layer].weights.range();
        &mut self.params[r]
    }

    pub fn layer_bias(&self, layer: usize) -> &[f64] {
        &self.params[self.arch.layers[layer].bias.range()]
    }

    pub fn layer_bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.arch.layers[layer].bias.range();
        &mut self.params[r]
    }

    /// Maps a channel-major `nc x nw` window to its latent vector.
    pub fn encode(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_len(window.len(), self.input_dim(), "window")?;
        Ok(run(&self.params, self.arch.encoder(), window))
    }

    /// Maps a latent vector back to a channel-major `nc x nw` window.
    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.check_len(latent.len(), self.latent_dim(), "latent vector")?;
        Ok(run(&self.params, self.arch.decoder(), latent))
    }

    pub fn reconstruct(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_len(window.len(), self.input_dim(), "window")?;
        Ok(run(&self.params, &self.arch.layers, window))
    }

    /// Encodes `count` windows stored back to back in `windows`.
    pub fn encode_batch(&self, windows: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.input_dim();
        if !windows.len().is_multiple_of(d) {
            return Err(Error::Shape(format!(
                "{} values do not form whole windows of {d}",
                windows.len()
            )));
        }
        Ok(windows
            .par_chunks_exact(d)
            .map(|w| run(&self.params, self.arch.encoder(), w))
            .collect())
    }

    fn check_len(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got != want {
            return Err(Error::Shape(format!("{what} has {got} values, the model expects {want}")));
        }
        Ok(())
    }
}

fn run(params: &[f64], layers: &[LayerSpec], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for l in layers {
        let mut y = vec![0.0; l.op.output_size()];
        layer_forward(params, l, &x, &mut y);
        x = y;
    }
    x
}

/// Computes `out = act(op(x) + b)`.
pub(crate) fn layer_forward(params: &[f64], l: &LayerSpec, x: &[f64], out: &mut [f64]) {
    let w = &params[l.weights.range()];
    let b = &params[l.bias.range()];
    match l.op {
        LayerOp::Dense {
            inputs,
            transposed: false,
            ..
        } => {
            for (o, z) in out.iter_mut().enumerate() {
                let row = &w[o * inputs..(o + 1) * inputs];
                *z = b[o] + dot(row, x);
            }
        }
        LayerOp::Dense {
            outputs,
            transposed: true,
            ..
        } => {
            out.copy_from_slice(b);
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    axpy(xi, &w[i * outputs..(i + 1) * outputs], out);
                }
            }
        }
        LayerOp::Conv {
            in_ch,
            out_ch,
            in_len,
            out_len,
            kernel,
            stride,
            padding,
        } => {
            for o in 0..out_ch {
                for t in 0..out_len {
                    let mut z = b[o];
                    for c in 0..in_ch {
                        let wk = &w[(o * in_ch + c) * kernel..(o * in_ch + c + 1) * kernel];
                        let xc = &x[c * in_len..(c + 1) * in_len];
                        for (k, &wv) in wk.iter().enumerate() {
                            if let Some(p) = (t * stride + k).checked_sub(padding).filter(|&p| p < in_len) {
                                z += wv * xc[p];
                            }
                        }
                    }
                    out[o * out_len + t] = z;
                }
            }
        }
        LayerOp::ConvTranspose {
            in_ch,
            out_ch,
            in_len,
            out_len,
            kernel,
            stride,
            padding,
            ..
        } => {
            for o in 0..out_ch {
                out[o * out_len..(o + 1) * out_len].fill(b[o]);
            }
            for c in 0..in_ch {
                for t in 0..in_len {
                    let xv = x[c * in_len + t];
                    if xv == 0.0 {
                        continue;
                    }
                    for o in 0..out_ch {
                        let wk = &w[(c * out_ch + o) * kernel..(c * out_ch + o + 1) * kernel];
                        for (k, &wv) in wk.iter().enumerate() {
                            if let Some(p) = (t * stride + k).checked_sub(padding).filter(|&p| p < out_len) {
                                out[o * out_len + p] += wv * xv;
                            }
                        }
                    }
                }
            }
        }
    }
    let act = l.activation;
    for z in out.iter_mut() {
        *z = act.apply(*z);
    }
}

/// Back-propagates `delta` (dL/d pre-activation of this layer) given the
/// layer input `x`; accumulates parameter gradients into `grad` and writes
/// dL/dx into `dx` when requested.
pub(crate) fn layer_backward(
    params: &[f64],
    l: &LayerSpec,
    x: &[f64],
    delta: &[f64],
    grad: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let w = &params[l.weights.range()];
    {
        let gb = &mut grad[l.bias.range()];
        match l.op {
            LayerOp::Dense { .. } => {
                for (g, d) in gb.iter_mut().zip(delta) {
                    *g += d;
                }
            }
            LayerOp::Conv { out_ch, out_len, .. } | LayerOp::ConvTranspose { out_ch, out_len, .. } => {
                for o in 0..out_ch {
                    gb[o] += delta[o * out_len..(o + 1) * out_len].iter().sum::<f64>();
                }
            }
        }
    }
    let gw = &mut grad[l.weights.range()];
    match l.op {
        LayerOp::Dense {
            inputs,
            transposed: false,
            ..
        } => {
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, x, &mut gw[o * inputs..(o + 1) * inputs]);
                }
            }
            if let Some(dx) = dx {
                dx.fill(0.0);
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, &w[o * inputs..(o + 1) * inputs], dx);
                    }
                }
            }
        }
        LayerOp::Dense {
            outputs,
            transposed: true,
            ..
        } => {
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    axpy(xi, delta, &mut gw[i * outputs..(i + 1) * outputs]);
                }
            }
            if let Some(dx) = dx {
                for (i, v) in dx.iter_mut().enumerate() {
                    *v = dot(&w[i * outputs..(i + 1) * outputs], delta);
                }
            }
        }
        LayerOp::Conv {
            in_ch,
            out_ch,
            in_len,
            out_len,
            kernel,
            stride,
            padding,
        } => {
            let mut dx = dx;
            if let Some(dx) = dx.as_deref_mut() {
                dx.fill(0.0);
            }
            for o in 0..out_ch {
                for t in 0..out_len {
                    let d = delta[o * out_len + t];
                    if d == 0.0 {
                        continue;
                    }
                    for c in 0..in_ch {
                        let base = (o * in_ch + c) * kernel;
                        for k in 0..kernel {
                            if let Some(p) = (t * stride + k).checked_sub(padding).filter(|&p| p < in_len) {
                                gw[base + k] += d * x[c * in_len + p];
                                if let Some(dx) = dx.as_deref_mut() {
                                    dx[c * in_len + p] += d * w[base + k];
                                }
                            }
                        }
                    }
                }
            }
        }
        LayerOp::ConvTranspose {
            in_ch,
            out_ch,
            in_len,
            out_len,
            kernel,
            stride,
            padding,
            ..
        } => {
            let mut dx = dx;
            for c in 0..in_ch {
                for t in 0..in_len {
                    let xv = x[c * in_len + t];
                    let mut acc = 0.0;
                    for o in 0..out_ch {
                        let base = (c * out_ch + o) * kernel;
                        for k in 0..kernel {
                            if let Some(p) = (t * stride + k).checked_sub(padding).filter(|&p| p < out_len) {
                                let d = delta[o * out_len + p];
                                gw[base + k] += d * xv;
                                acc += d * w[base + k];
                            }
                        }
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        dx[c * in_len + t] = acc;
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Per-thread buffers for one forward/backward pass.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    back: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(arch: &AeArchitecture) -> Self {
        let mut acts = vec![vec![0.0; arch.input_dim()]];
        let mut widest = arch.input_dim();
        for l in &arch.layers {
            let n = l.op.output_size();
            widest = widest.max(n);
            acts.push(vec![0.0; n]);
        }
        Self {
            acts,
            delta: Vec::with_capacity(widest),
            back: Vec::with_capacity(widest),
        }
    }

    /// On/off state of every ReLU unit after the last forward pass.
    pub(crate) fn relu_pattern(&self, arch: &AeArchitecture) -> Vec<bool> {
        arch.layers
            .iter()
            .zip(&self.acts[1..])
            .filter(|(l, _)| l.activation == Activation::Relu)
            .flat_map(|(_, a)| a.iter().map(|&v| v > 0.0))
            .collect()
    }

    pub(crate) fn input_mut(&mut self) -> &mut [f64] {
        &mut self.acts[0]
    }

    /// Forward pass on the buffered input; returns the reconstruction MSE.
    pub(crate) fn forward(&mut self, params: &[f64], arch: &AeArchitecture) -> f64 {
        for (k, l) in arch.layers.iter().enumerate() {
            let (head, tail) = self.acts.split_at_mut(k + 1);
            layer_forward(params, l, &head[k], &mut tail[0]);
        }
        let x = &self.acts[0];
        let y = self.acts.last().unwrap();
        mse(x, y)
    }

    /// Backward pass after [`Workspace::forward`]; adds `scale * dMSE/dθ`
    /// to `grad`.
    pub(crate) fn backward(&mut self, params: &[f64], arch: &AeArchitecture, scale: f64, grad: &mut [f64]) {
        let depth = arch.layers.len();
        let d = arch.input_dim() as f64;
        let x = &self.acts[0];
        let y = &self.acts[depth];
        self.delta.clear();
        self.delta
            .extend(y.iter().zip(x).map(|(yi, xi)| scale * 2.0 * (yi - xi) / d));
        for k in (0..depth).rev() {
            let l = &arch.layers[k];
            let out = &self.acts[k + 1];
            for (dv, &a) in self.delta.iter_mut().zip(out) {
                *dv *= l.activation.derivative_from_output(a);
            }
            let need_dx = k > 0;
            self.back.clear();
            self.back.resize(l.op.input_size(), 0.0);
            layer_backward(
                params,
                l,
                &self.acts[k],
                &self.delta,
                grad,
                need_dx.then_some(&mut self.back[..]),
            );
            std::mem::swap(&mut self.delta, &mut self.back);
        }
    }
}

pub(crate) fn mse(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

/// Reconstruction MSE and its gradient for a single window.
pub fn loss_and_gradient(model: &AeModel, window: &[f64]) -> Result<(f64, Vec<f64>)> {
    model.check_len(window.len(), model.input_dim(), "window")?;
    let mut ws = Workspace::new(&model.arch);
    ws.input_mut().copy_from_slice(window);
    let loss = ws.forward(&model.params, &model.arch);
    let mut grad = vec![0.0; model.params.len()];
    ws.backward(&model.params, &model.arch, 1.0, &mut grad);
    Ok((loss, grad))
}

pub fn reconstruction_loss(model: &AeModel, window: &[f64]) -> Result<f64> {
    let y = model.reconstruct(window)?;
    Ok(mse(window, &y))
}
