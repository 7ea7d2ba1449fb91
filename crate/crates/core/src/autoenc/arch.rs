use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    FullyConnected,
    Convolutional,
}

impl ArchKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchKind::FullyConnected => "fc",
            ArchKind::Convolutional => "conv",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ArchKind::FullyConnected => 0,
            ArchKind::Convolutional => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ArchKind::FullyConnected),
            1 => Some(ArchKind::Convolutional),
            _ => None,
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" | "fully_connected" | "dense" => Ok(ArchKind::FullyConnected),
            "conv" | "convolutional" | "cnn" => Ok(ArchKind::Convolutional),
            other => Err(Error::InvalidConfig(format!(
                "unknown architecture '{other}' (expected fc or conv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Slice `[offset, offset + len)` of the flat parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRange {
    pub offset: usize,
    pub len: usize,
}

impl ParamRange {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerOp {
    /// `outputs x inputs` row-major weights; a transposed layer reads the
    /// `inputs x outputs` matrix of the encoder layer it mirrors.
    Dense {
        inputs: usize,
        outputs: usize,
        transposed: bool,
    },
    /// Weights `out_ch x in_ch x kernel`.
    Conv {
        in_ch: usize,
        out_ch: usize,
        in_len: usize,
        out_len: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Weights `in_ch x out_ch x kernel`.
    ConvTranspose {
        in_ch: usize,
        out_ch: usize,
        in_len: usize,
        out_len: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    },
}

impl LayerOp {
    pub fn input_size(&self) -> usize {
        match *self {
            LayerOp::Dense { inputs, .. } => inputs,
            LayerOp::Conv { in_ch, in_len, .. } | LayerOp::ConvTranspose { in_ch, in_len, .. } => in_ch * in_len,
        }
    }

    pub fn output_size(&self) -> usize {
        match *self {
            LayerOp::Dense { outputs, .. } => outputs,
            LayerOp::Conv { out_ch, out_len, .. } | LayerOp::ConvTranspose { out_ch, out_len, .. } => {
                out_ch * out_len
            }
        }
    }

    fn weight_count(&self) -> usize {
        match *self {
            LayerOp::Dense { inputs, outputs, .. } => inputs * outputs,
            LayerOp::Conv {
                in_ch, out_ch, kernel, ..
            }
            | LayerOp::ConvTranspose {
                in_ch, out_ch, kernel, ..
            } => in_ch * out_ch * kernel,
        }
    }

    fn bias_count(&self) -> usize {
        match *self {
            LayerOp::Dense { outputs, .. } => outputs,
            LayerOp::Conv { out_ch, .. } | LayerOp::ConvTranspose { out_ch, .. } => out_ch,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerOp::Dense { inputs, .. } => inputs,
            LayerOp::Conv { in_ch, kernel, .. } | LayerOp::ConvTranspose { in_ch, kernel, .. } => in_ch * kernel,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            LayerOp::Dense { transposed: false, .. } => "dense",
            LayerOp::Dense { transposed: true, .. } => "dense_tied",
            LayerOp::Conv { .. } => "conv",
            LayerOp::ConvTranspose { .. } => "conv_transpose",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub op: LayerOp,
    pub activation: Activation,
    pub weights: ParamRange,
    pub bias: ParamRange,
    /// Index of the encoder layer whose weights this layer reads, if any.
    pub tied_to: Option<usize>,
}

impl LayerSpec {
    pub fn type_name(&self) -> &'static str {
        self.op.type_name()
    }

    pub fn fan_in(&self) -> usize {
        self.op.fan_in()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeArchitecture {
    pub kind: ArchKind,
    pub nc: usize,
    pub nw: usize,
    pub latent_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// Layers `[0, encoder_len)` form the encoder.
    pub encoder_len: usize,
    pub n_params: usize,
}

impl AeArchitecture {
    pub fn input_dim(&self) -> usize {
        self.nc * self.nw
    }

    pub fn encoder(&self) -> &[LayerSpec] {
        &self.layers[..self.encoder_len]
    }

    pub fn decoder(&self) -> &[LayerSpec] {
        &self.layers[self.encoder_len..]
    }
}

struct Builder {
    layers: Vec<LayerSpec>,
    next: usize,
}

impl Builder {
    fn new() -> Self {
        Self {
            layers: Vec::new(),
            next: 0,
        }
    }

    fn alloc(&mut self, len: usize) -> ParamRange {
        let r = ParamRange { offset: self.next, len };
        self.next += len;
        r
    }

    fn push(&mut self, op: LayerOp, activation: Activation) -> usize {
        let weights = self.alloc(op.weight_count());
        let bias = self.alloc(op.bias_count());
        self.layers.push(LayerSpec {
            op,
            activation,
            weights,
            bias,
            tied_to: None,
        });
        self.layers.len() - 1
    }

    fn push_tied(&mut self, encoder_layer: usize, activation: Activation) {
        let src = self.layers[encoder_layer];
        let LayerOp::Dense { inputs, outputs, .. } = src.op else {
            unreachable!("only dense layers are tied");
        };
        let op = LayerOp::Dense {
            inputs: outputs,
            outputs: inputs,
            transposed: true,
        };
        let bias = self.alloc(inputs);
        self.layers.push(LayerSpec {
            op,
            activation,
            weights: src.weights,
            bias,
            tied_to: Some(encoder_layer),
        });
    }
}

fn conv_out_len(in_len: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (in_len + 2 * padding - kernel) / stride + 1
}

/// Builds the layer layout for `kind` on `nc x nw` windows.
pub fn build_arch(kind: ArchKind, nc: usize, nw: usize) -> Result<AeArchitecture> {
    if nc < 1 {
        return Err(Error::InvalidArch("at least one channel is required".into()));
    }
    if nw < 2 {
        return Err(Error::InvalidArch(format!("window length {nw} is too short")));
    }
    let mut b = Builder::new();
    let (latent_dim, encoder_len) = match kind {
        ArchKind::FullyConnected => {
            let d = nc * nw;
            let sizes = [d, d.div_ceil(2), d.div_ceil(4), (d as f64 * 0.1).ceil() as usize];
            let mut enc = Vec::new();
            for w in sizes.windows(2) {
                enc.push(b.push(
                    LayerOp::Dense {
                        inputs: w[0],
                        outputs: w[1],
                        transposed: false,
                    },
                    Activation::Sigmoid,
                ));
            }
            for (k, &l) in enc.iter().rev().enumerate() {
                let act = if k + 1 == enc.len() {
                    Activation::Linear
                } else {
                    Activation::Sigmoid
                };
                b.push_tied(l, act);
            }
            (sizes[3], enc.len())
        }
        ArchKind::Convolutional => {
            if !nw.is_multiple_of(4) {
                return Err(Error::InvalidArch(format!(
                    "convolutional windows must be a multiple of 4 samples (nw mod 4 = 0), got nw = {nw}"
                )));
            }
            let (k, s, p) = (3, 2, 1);
            let l1 = conv_out_len(nw, k, s, p);
            let l2 = conv_out_len(l1, k, s, p);
            b.push(
                LayerOp::Conv {
                    in_ch: nc,
                    out_ch: 2 * nc,
                    in_len: nw,
                    out_len: l1,
                    kernel: k,
                    stride: s,
                    padding: p,
                },
                Activation::Relu,
            );
            b.push(
                LayerOp::Conv {
                    in_ch: 2 * nc,
                    out_ch: 4 * nc,
                    in_len: l1,
                    out_len: l2,
                    kernel: k,
                    stride: s,
                    padding: p,
                },
                Activation::Relu,
            );
            let flat = 4 * nc * l2;
            let sizes = [flat, flat.div_ceil(2), flat.div_ceil(4), flat.div_ceil(6)];
            let mut enc = Vec::new();
            for w in sizes.windows(2) {
                enc.push(b.push(
                    LayerOp::Dense {
                        inputs: w[0],
                        outputs: w[1],
                        transposed: false,
                    },
                    Activation::Relu,
                ));
            }
            for &l in enc.iter().rev() {
                b.push_tied(l, Activation::Relu);
            }
            b.push(
                LayerOp::ConvTranspose {
                    in_ch: 4 * nc,
                    out_ch: 2 * nc,
                    in_len: l2,
                    out_len: l1,
                    kernel: k,
                    stride: s,
                    padding: p,
                    output_padding: l1 + 2 * p - (l2 - 1) * s - k,
                },
                Activation::Relu,
            );
            b.push(
                LayerOp::ConvTranspose {
                    in_ch: 2 * nc,
                    out_ch: nc,
                    in_len: l1,
                    out_len: nw,
                    kernel: k,
                    stride: s,
                    padding: p,
                    output_padding: nw + 2 * p - (l1 - 1) * s - k,
                },
                Activation::Linear,
            );
            (sizes[3], 5)
        }
    };
    Ok(AeArchitecture {
        kind,
        nc,
        nw,
        latent_dim,
        layers: b.layers,
        encoder_len,
        n_params: b.next,
    })
}

/// Largest multiple of 4 not above `nw` (at least 4).
pub fn round_conv_window(nw: usize) -> usize {
    (nw / 4 * 4).max(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_sizes(arch: &AeArchitecture) -> Vec<(usize, usize)> {
        arch.layers
            .iter()
            .filter_map(|l| match l.op {
                LayerOp::Dense { inputs, outputs, .. } => Some((inputs, outputs)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn fc_sizes_for_nine_channels() {
        let arch = build_arch(ArchKind::FullyConnected, 9, 100).unwrap();
        assert_eq!(arch.latent_dim, 90);
        assert_eq!(
            dense_sizes(&arch),
            vec![(900, 450), (450, 225), (225, 90), (90, 225), (225, 450), (450, 900)]
        );
        assert_eq!(arch.encoder_len, 3);
        let w: usize = 900 * 450 + 450 * 225 + 225 * 90;
        let b: usize = 450 + 225 + 90 + 225 + 450 + 900;
        assert_eq!(arch.n_params, w + b);
        assert_eq!(arch.layers.last().unwrap().activation, Activation::Linear);
    }

    #[test]
    fn conv_latent_is_a_sixth() {
        let arch = build_arch(ArchKind::Convolutional, 10, 48).unwrap();
        assert_eq!(arch.latent_dim, 80);
        assert_eq!(arch.encoder().last().unwrap().op.output_size(), 80);
        assert_eq!(arch.layers[1].op.output_size(), 480);
        assert_eq!(arch.layers.last().unwrap().op.output_size(), 480);
        for l in &arch.layers {
            if let LayerOp::ConvTranspose { output_padding, .. } = l.op {
                assert_eq!(output_padding, 1);
            }
        }
    }

    #[test]
    fn conv_rejects_nw_not_multiple_of_four() {
        let err = build_arch(ArchKind::Convolutional, 3, 50).unwrap_err();
        assert!(matches!(err, Error::InvalidArch(_)));
        assert!(err.to_string().contains("mod 4"));
    }

    #[test]
    fn layer_sizes_chain() {
        for kind in [ArchKind::FullyConnected, ArchKind::Convolutional] {
            for nc in [1, 3, 9] {
                for nw in [4, 8, 20, 48, 100] {
                    let arch = build_arch(kind, nc, nw).unwrap();
                    let mut size = nc * nw;
                    for l in &arch.layers {
                        assert_eq!(l.op.input_size(), size);
                        size = l.op.output_size();
                    }
                    assert_eq!(size, nc * nw);
                }
            }
        }
    }

    #[test]
    fn tied_layers_share_weights() {
        let arch = build_arch(ArchKind::FullyConnected, 2, 10).unwrap();
        for l in arch.decoder() {
            let src = &arch.layers[l.tied_to.unwrap()];
            assert_eq!(l.weights, src.weights);
            assert_ne!(l.bias, src.bias);
        }
    }

    #[test]
    fn round_conv_window_rounds_down() {
        assert_eq!(round_conv_window(50), 48);
        assert_eq!(round_conv_window(100), 100);
        assert_eq!(round_conv_window(3), 4);
    }
}
