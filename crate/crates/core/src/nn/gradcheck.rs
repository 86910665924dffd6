//! Finite-difference verification of [`backward`](super::backward).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::Activation;
use super::loss::{loss, LossKind};
use super::network::{forward, ForwardCache, NetworkSpec, NetworkWeights};
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so that parameters whose true
/// gradient is zero are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameters plus input coordinates that were compared.
    pub checked: usize,
    /// Probes skipped because the perturbation crossed a relu kink.
    pub skipped: usize,
    /// Flat index of the worst probe; parameters first, then input coordinates.
    pub worst_index: Option<usize>,
}

fn relu_pattern(spec: &NetworkSpec, cache: &ForwardCache) -> Vec<bool> {
    spec.layers
        .iter()
        .zip(cache.pre_activations())
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, z)| z.iter().map(|&v| v > 0.0))
        .collect()
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient against central differences with step
/// `eps`, over every parameter and every input coordinate.
///
/// A probe is skipped when its `+eps` and `-eps` evaluations put any relu
/// unit on different sides of zero; the loss is not differentiable there.
pub fn gradient_check(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    x: &[f64],
    target: &[f64],
    loss_kind: LossKind,
    eps: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidInput(format!("gradient check step {eps} outside [1e-7, 1e-3]")));
    }
    let (_, cache) = forward(spec, weights, x)?;
    let grads = super::backward(spec, weights, &cache, loss_kind, target)?;

    let mut analytic: Vec<f64> = grads.iter().copied().collect();
    let n_params = analytic.len();
    analytic.extend_from_slice(&grads.input);

    let evaluate = |w: &NetworkWeights, input: &[f64]| -> Result<(f64, Vec<bool>)> {
        let (out, c) = forward(spec, w, input)?;
        Ok((loss(loss_kind, &out, target)?, relu_pattern(spec, &c)))
    };

    // (layer, offset within the layer's weights-then-bias block) for each parameter
    let locations: Vec<(usize, usize)> = weights
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(li, l)| (0..l.weights.len() + l.bias.len()).map(move |k| (li, k)))
        .collect();

    let probe = |index: usize| -> Result<Option<f64>> {
        let (plus, minus) = if index < n_params {
            let (li, k) = locations[index];
            let shifted = |delta: f64| {
                let mut w = weights.clone();
                let layer = w.layer_mut(li);
                let nw = layer.weights.len();
                if k < nw {
                    layer.weights[k] += delta;
                } else {
                    layer.bias[k - nw] += delta;
                }
                evaluate(&w, x)
            };
            (shifted(eps)?, shifted(-eps)?)
        } else {
            let j = index - n_params;
            let shifted = |delta: f64| {
                let mut input = x.to_vec();
                input[j] += delta;
                evaluate(weights, &input)
            };
            (shifted(eps)?, shifted(-eps)?)
        };
        if plus.1 != minus.1 {
            return Ok(None);
        }
        let numeric = (plus.0 - minus.0) / (2.0 * eps);
        Ok(Some(relative_error(analytic[index], numeric)))
    };

    let results: Vec<Result<Option<f64>>> = (0..analytic.len()).into_par_iter().map(probe).collect();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
        worst_index: None,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            None => report.skipped += 1,
            Some(e) => {
                report.checked += 1;
                if e > report.max_relative_error || report.worst_index.is_none() {
                    report.max_relative_error = e;
                    report.worst_index = Some(i);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::layer::LayerSpec;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn linear_network_is_nearly_exact() {
        let spec = NetworkSpec::new(vec![
            LayerSpec::dense(5, 4, Activation::Identity),
            LayerSpec::dense(4, 3, Activation::Identity),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = NetworkWeights::init(&spec, &mut rng);
        let x = random_vec(&mut rng, 5);
        let t = random_vec(&mut rng, 3);
        let r = gradient_check(&spec, &w, &x, &t, LossKind::Mse, 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-8, "{r:?}");
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn relu_tanh_network_passes() {
        let spec = NetworkSpec::new(vec![
            LayerSpec::dense(6, 5, Activation::Relu),
            LayerSpec::dense(5, 4, Activation::Tanh),
            LayerSpec::dense(4, 2, Activation::Identity),
        ])
        .unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = NetworkWeights::init(&spec, &mut rng);
            let x = random_vec(&mut rng, 6);
            let t = random_vec(&mut rng, 2);
            let r = gradient_check(&spec, &w, &x, &t, LossKind::Mse, 1e-5).unwrap();
            assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn zero_relu_network_flags_kinks() {
        let spec = NetworkSpec::new(vec![
            LayerSpec::dense(3, 3, Activation::Relu),
            LayerSpec::dense(3, 1, Activation::Identity),
        ])
        .unwrap();
        let w = NetworkWeights::zeros(&spec);
        let r = gradient_check(&spec, &w, &[0.5, -0.2, 0.1], &[1.0], LossKind::Mse, 1e-5).unwrap();
        assert!(r.skipped > 0);
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn step_outside_range_is_rejected() {
        let spec = NetworkSpec::new(vec![LayerSpec::dense(1, 1, Activation::Identity)]).unwrap();
        let w = NetworkWeights::zeros(&spec);
        assert!(gradient_check(&spec, &w, &[1.0], &[0.0], LossKind::Mse, 1e-2).is_err());
    }
}
