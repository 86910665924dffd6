use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::layer::{LayerKind, LayerSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_len: usize,
    pub output_len: usize,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
        let spec = NetworkSpec {
            input_len: first.in_len,
            output_len: layers.last().map(|l| l.out_len).unwrap_or(0),
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
            if i > 0 && self.layers[i - 1].out_len != layer.in_len {
                return Err(Error::LayerConfig {
                    layer: i,
                    reason: format!(
                        "input length {} does not match previous output length {}",
                        layer.in_len,
                        self.layers[i - 1].out_len
                    ),
                });
            }
        }
        if self.layers[0].in_len != self.input_len {
            return Err(Error::LayerConfig {
                layer: 0,
                reason: format!("input_len {} != first layer input {}", self.input_len, self.layers[0].in_len),
            });
        }
        let last = self.layers.len() - 1;
        if self.layers[last].out_len != self.output_len {
            return Err(Error::LayerConfig {
                layer: last,
                reason: format!("output_len {} != last layer output {}", self.output_len, self.layers[last].out_len),
            });
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight_len() + l.bias_len()).sum()
    }
}

/// Weight and bias block of one layer. Dense weights are row-major with shape
/// `(out_len, in_len)`; convolution weights are the kernel taps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(spec: &LayerSpec) -> Self {
        LayerParams {
            weights: vec![0.0; spec.weight_len()],
            bias: vec![0.0; spec.bias_len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn check(&self, spec: &LayerSpec, layer: usize) -> Result<()> {
        if self.weights.len() != spec.weight_len() {
            return Err(Error::LayerConfig {
                layer,
                reason: format!("expected {} weights, found {}", spec.weight_len(), self.weights.len()),
            });
        }
        if self.bias.len() != spec.bias_len() {
            return Err(Error::LayerConfig {
                layer,
                reason: format!("expected {} biases, found {}", spec.bias_len(), self.bias.len()),
            });
        }
        Ok(())
    }
}

static NEXT_WEIGHTS_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_WEIGHTS_ID.fetch_add(1, Ordering::Relaxed)
}

/// Parameter store for a [`NetworkSpec`].
///
/// Every mutable borrow bumps an internal version so that a [`ForwardCache`]
/// taken before the mutation is rejected by [`backward`].
#[derive(Debug)]
pub struct NetworkWeights {
    layers: Vec<LayerParams>,
    id: u64,
    version: u64,
}

impl Clone for NetworkWeights {
    fn clone(&self) -> Self {
        NetworkWeights {
            layers: self.layers.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for NetworkWeights {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl NetworkWeights {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self::from_layers(spec.layers.iter().map(LayerParams::zeros).collect())
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                let (fan_in, fan_out) = l.fans();
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                LayerParams {
                    weights: (0..l.weight_len()).map(|_| dist.sample(rng)).collect(),
                    bias: vec![0.0; l.bias_len()],
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<LayerParams>) -> Self {
        NetworkWeights {
            layers,
            id: fresh_id(),
            version: 0,
        }
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut LayerParams {
        self.version += 1;
        &mut self.layers[index]
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        self.version += 1;
        &mut self.layers
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.iter())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::Config(format!(
                "weights have {} layers, spec has {}",
                self.layers.len(),
                spec.layers.len()
            )));
        }
        for (i, (p, l)) in self.layers.iter().zip(&spec.layers).enumerate() {
            p.check(l, i)?;
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: i,
                    what: "parameter".into(),
                });
            }
        }
        Ok(())
    }

    fn stamp(&self) -> (u64, u64) {
        (self.id, self.version)
    }
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre_activations: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    stamp: (u64, u64),
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&self.input)
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    /// Pre-activation values of every layer, in order.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre_activations
    }
}

/// Parameter gradients with the same layout as [`NetworkWeights`], plus the
/// gradient with respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Gradients {
            layers: spec.layers.iter().map(LayerParams::zeros).collect(),
            input: vec![0.0; spec.input_len],
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.iter_mut().zip(b.iter()).for_each(|(x, y)| *x += y);
        }
        self.input.iter_mut().zip(&other.input).for_each(|(x, y)| *x += y);
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.iter_mut().for_each(|v| *v *= factor);
        }
        self.input.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.iter())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn layer_forward(spec: &LayerSpec, params: &LayerParams, x: &[f64], z: &mut Vec<f64>) {
    z.clear();
    z.resize(spec.out_len, 0.0);
    match spec.kind {
        LayerKind::Dense => {
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &params.weights[o * spec.in_len..(o + 1) * spec.in_len];
                *zo = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + params.bias[o];
            }
        }
        LayerKind::Conv1d => {
            let g = spec.conv.expect("validated conv geometry");
            let n = x.len() as isize;
            for (o, zo) in z.iter_mut().enumerate() {
                let base = (o * g.stride) as isize - g.padding as isize;
                let mut acc = 0.0;
                for (t, w) in params.weights.iter().enumerate() {
                    let idx = base + t as isize;
                    if idx >= 0 && idx < n {
                        acc += w * x[idx as usize];
                    }
                }
                *zo = acc;
            }
            add_bias(z, &params.bias);
        }
        LayerKind::TransposedConv1d => {
            let g = spec.conv.expect("validated conv geometry");
            let n = z.len() as isize;
            for (i, xi) in x.iter().enumerate() {
                let base = (i * g.stride) as isize - g.padding as isize;
                for (t, w) in params.weights.iter().enumerate() {
                    let j = base + t as isize;
                    if j >= 0 && j < n {
                        z[j as usize] += w * xi;
                    }
                }
            }
            add_bias(z, &params.bias);
        }
    }
}

fn add_bias(z: &mut [f64], bias: &[f64]) {
    if bias.len() == 1 {
        z.iter_mut().for_each(|v| *v += bias[0]);
    } else {
        z.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
    }
}

/// Runs `x` through the network, returning the output and the activation
/// cache needed by [`backward`].
pub fn forward(spec: &NetworkSpec, weights: &NetworkWeights, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if x.len() != spec.input_len {
        return Err(Error::LayerConfig {
            layer: 0,
            reason: format!("input has {} values, layer expects {}", x.len(), spec.input_len),
        });
    }
    if weights.layers.len() != spec.layers.len() {
        weights.check_shapes(spec)?;
    }
    let mut pre_activations = Vec::with_capacity(spec.layers.len());
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(spec.layers.len());
    for (i, (layer, params)) in spec.layers.iter().zip(&weights.layers).enumerate() {
        if params.weights.len() != layer.weight_len() || params.bias.len() != layer.bias_len() {
            params.check(layer, i)?;
        }
        let input = outputs.last().map(Vec::as_slice).unwrap_or(x);
        if input.len() != layer.in_len {
            return Err(Error::LayerConfig {
                layer: i,
                reason: format!("input has {} values, layer expects {}", input.len(), layer.in_len),
            });
        }
        let mut z = Vec::with_capacity(layer.out_len);
        layer_forward(layer, params, input, &mut z);
        let y: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
        pre_activations.push(z);
        outputs.push(y);
    }
    let out = outputs.last().cloned().unwrap_or_default();
    Ok((
        out,
        ForwardCache {
            input: x.to_vec(),
            pre_activations,
            outputs,
            stamp: weights.stamp(),
        },
    ))
}

/// Output-only forward pass.
pub fn predict(spec: &NetworkSpec, weights: &NetworkWeights, x: &[f64]) -> Result<Vec<f64>> {
    forward(spec, weights, x).map(|(y, _)| y)
}

/// Back-propagates `d_output` (gradient of a scalar loss with respect to the
/// network output) through the cached forward pass.
pub fn backward_from_output(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    cache: &ForwardCache,
    d_output: &[f64],
) -> Result<Gradients> {
    if cache.stamp != weights.stamp() {
        return Err(Error::StaleCache(
            "weights changed (or differ) since the forward pass".into(),
        ));
    }
    if cache.outputs.len() != spec.layers.len() || cache.input.len() != spec.input_len {
        return Err(Error::StaleCache("cache was produced by a different network".into()));
    }
    if d_output.len() != spec.output_len {
        return Err(Error::shape(spec.output_len, d_output.len(), "output gradient"));
    }

    let mut grads = Gradients::zeros(spec);
    let mut dy = d_output.to_vec();
    for i in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[i];
        let params = &weights.layers[i];
        let z = &cache.pre_activations[i];
        let y = &cache.outputs[i];
        let x: &[f64] = if i == 0 { &cache.input } else { &cache.outputs[i - 1] };
        let dz: Vec<f64> = dy
            .iter()
            .zip(z.iter().zip(y))
            .map(|(d, (&zv, &yv))| d * layer.activation.derivative(zv, yv))
            .collect();
        let g = &mut grads.layers[i];
        let mut dx = vec![0.0; layer.in_len];
        match layer.kind {
            LayerKind::Dense => {
                for (o, &d) in dz.iter().enumerate() {
                    let row = o * layer.in_len;
                    g.bias[o] += d;
                    if d == 0.0 {
                        continue;
                    }
                    for (k, &xv) in x.iter().enumerate() {
                        g.weights[row + k] += d * xv;
                        dx[k] += params.weights[row + k] * d;
                    }
                }
            }
            LayerKind::Conv1d => {
                let geo = layer.conv.expect("validated conv geometry");
                let n = x.len() as isize;
                for (o, &d) in dz.iter().enumerate() {
                    let base = (o * geo.stride) as isize - geo.padding as isize;
                    for (t, w) in params.weights.iter().enumerate() {
                        let idx = base + t as isize;
                        if idx >= 0 && idx < n {
                            g.weights[t] += d * x[idx as usize];
                            dx[idx as usize] += w * d;
                        }
                    }
                }
                accumulate_bias(&mut g.bias, &dz);
            }
            LayerKind::TransposedConv1d => {
                let geo = layer.conv.expect("validated conv geometry");
                let n = dz.len() as isize;
                for (ix, &xv) in x.iter().enumerate() {
                    let base = (ix * geo.stride) as isize - geo.padding as isize;
                    for (t, w) in params.weights.iter().enumerate() {
                        let j = base + t as isize;
                        if j >= 0 && j < n {
                            let d = dz[j as usize];
                            g.weights[t] += xv * d;
                            dx[ix] += w * d;
                        }
                    }
                }
                accumulate_bias(&mut g.bias, &dz);
            }
        }
        dy = dx;
    }
    grads.input = dy;
    Ok(grads)
}

fn accumulate_bias(bias_grad: &mut [f64], dz: &[f64]) {
    if bias_grad.len() == 1 {
        bias_grad[0] += dz.iter().sum::<f64>();
    } else {
        bias_grad.iter_mut().zip(dz).for_each(|(b, d)| *b += d);
    }
}

/// Gradient of `loss_kind(output, target)` with respect to every parameter
/// and to the network input.
pub fn backward(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    cache: &ForwardCache,
    loss_kind: super::LossKind,
    target: &[f64],
) -> Result<Gradients> {
    let d_out = super::loss_gradient(loss_kind, cache.output(), target)?;
    backward_from_output(spec, weights, cache, &d_out)
}

/// A spec together with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub weights: NetworkWeights,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: NetworkWeights) -> Result<Self> {
        spec.validate()?;
        weights.check_shapes(&spec)?;
        Ok(Network { spec, weights })
    }

    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let weights = NetworkWeights::init(&spec, rng);
        Ok(Network { spec, weights })
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        forward(&self.spec, &self.weights, x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        predict(&self.spec, &self.weights, x)
    }

    pub fn backward_from_output(&self, cache: &ForwardCache, d_output: &[f64]) -> Result<Gradients> {
        backward_from_output(&self.spec, &self.weights, cache, d_output)
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len
    }

    pub fn output_len(&self) -> usize {
        self.spec.output_len
    }
}
