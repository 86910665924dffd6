//! Layer descriptions and 1D convolution geometry.
//!
//! Every layer maps a flat input vector of `in_len` values to a flat output of
//! `out_len` values. Convolutions are single-channel: one kernel vector slides
//! over the whole input. For `conv1d` the output length follows
//!
//! ```text
//! out_len = floor((in_len + 2*padding - kernel_size) / stride) + 1
//! ```
//!
//! and a transposed convolution with the same geometry maps `out_len` back to
//! `in_len`, using an implicit output padding in `[0, stride)` to make up the
//! lengths lost by the floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Conv1d,
    TransposedConv1d,
}

/// How a convolution layer's bias is laid out. Dense layers always carry one
/// bias per output unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// One scalar added to every output position.
    Shared,
    /// One bias per output position.
    PerPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    /// Output length of a forward convolution over `in_len` samples, or `None`
    /// when the padded input is shorter than the kernel.
    pub fn conv_out_len(&self, in_len: usize) -> Option<usize> {
        let padded = in_len + 2 * self.padding;
        if self.stride == 0 || padded < self.kernel_size {
            return None;
        }
        Some((padded - self.kernel_size) / self.stride + 1)
    }

    /// Finds a geometry mapping `in_len` samples onto exactly `out_len`
    /// outputs. The stride is `floor(in_len / out_len)` and the kernel spans
    /// `2*stride + 1` samples with the smallest padding that hits `out_len`.
    /// When no padding works the kernel is widened until one does.
    pub fn solve(in_len: usize, out_len: usize) -> Option<ConvGeometry> {
        if out_len == 0 || in_len < out_len {
            return None;
        }
        let stride = in_len / out_len;
        (2 * stride + 1..=in_len.max(2 * stride + 1))
            .flat_map(|kernel_size| {
                (0..kernel_size).map(move |padding| ConvGeometry {
                    kernel_size,
                    stride,
                    padding,
                })
            })
            .find(|g| g.conv_out_len(in_len) == Some(out_len))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_len: usize,
    pub out_len: usize,
    /// Present for the two convolution kinds, absent for dense layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvGeometry>,
    pub activation: Activation,
    pub bias: BiasMode,
}

impl LayerSpec {
    pub fn dense(in_len: usize, out_len: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            in_len,
            out_len,
            conv: None,
            activation,
            bias: BiasMode::PerPosition,
        }
    }

    pub fn conv1d(
        in_len: usize,
        geometry: ConvGeometry,
        activation: Activation,
        bias: BiasMode,
    ) -> Result<Self> {
        let out_len = geometry.conv_out_len(in_len).ok_or_else(|| Error::LayerConfig {
            layer: 0,
            reason: format!("kernel {} longer than padded input {in_len}", geometry.kernel_size),
        })?;
        let spec = LayerSpec {
            kind: LayerKind::Conv1d,
            in_len,
            out_len,
            conv: Some(geometry),
            activation,
            bias,
        };
        spec.validate(0)?;
        Ok(spec)
    }

    /// Transposed convolution that undoes the length change of a `conv1d`
    /// with `geometry` applied to `out_len` samples.
    pub fn transposed_conv1d(
        in_len: usize,
        out_len: usize,
        geometry: ConvGeometry,
        activation: Activation,
        bias: BiasMode,
    ) -> Result<Self> {
        let spec = LayerSpec {
            kind: LayerKind::TransposedConv1d,
            in_len,
            out_len,
            conv: Some(geometry),
            activation,
            bias,
        };
        spec.validate(0)?;
        Ok(spec)
    }

    pub fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.in_len * self.out_len,
            LayerKind::Conv1d | LayerKind::TransposedConv1d => {
                self.conv.map(|g| g.kernel_size).unwrap_or(0)
            }
        }
    }

    pub fn bias_len(&self) -> usize {
        match (self.kind, self.bias) {
            (LayerKind::Dense, _) | (_, BiasMode::PerPosition) => self.out_len,
            (_, BiasMode::Shared) => 1,
        }
    }

    /// Fan-in and fan-out used by the uniform initialiser.
    pub fn fans(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Dense => (self.in_len, self.out_len),
            LayerKind::Conv1d => {
                let k = self.weight_len();
                let s = self.conv.map(|g| g.stride).unwrap_or(1);
                (k, k.div_ceil(s))
            }
            LayerKind::TransposedConv1d => {
                let k = self.weight_len();
                let s = self.conv.map(|g| g.stride).unwrap_or(1);
                (k.div_ceil(s), k)
            }
        }
    }

    /// Output padding of a transposed convolution.
    pub(crate) fn output_padding(&self) -> Option<usize> {
        let g = self.conv?;
        let span = (self.in_len.checked_sub(1)? * g.stride + g.kernel_size).checked_sub(2 * g.padding)?;
        self.out_len.checked_sub(span)
    }

    pub fn validate(&self, layer: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::LayerConfig { layer, reason });
        if self.in_len == 0 || self.out_len == 0 {
            return fail("layer lengths must be positive".into());
        }
        match self.kind {
            LayerKind::Dense => {
                if self.conv.is_some() {
                    return fail("dense layer carries convolution geometry".into());
                }
            }
            LayerKind::Conv1d => {
                let Some(g) = self.conv else {
                    return fail("conv1d layer without geometry".into());
                };
                if g.kernel_size == 0 || g.stride == 0 {
                    return fail("kernel_size and stride must be >= 1".into());
                }
                if g.conv_out_len(self.in_len) != Some(self.out_len) {
                    return fail(format!(
                        "conv1d geometry {g:?} maps {} samples to {:?}, not {}",
                        self.in_len,
                        g.conv_out_len(self.in_len),
                        self.out_len
                    ));
                }
            }
            LayerKind::TransposedConv1d => {
                let Some(g) = self.conv else {
                    return fail("transposed_conv1d layer without geometry".into());
                };
                if g.kernel_size == 0 || g.stride == 0 {
                    return fail("kernel_size and stride must be >= 1".into());
                }
                match self.output_padding() {
                    Some(op) if op < g.stride => {}
                    _ => {
                        return fail(format!(
                            "transposed geometry {g:?} cannot map {} samples to {}",
                            self.in_len, self.out_len
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}
