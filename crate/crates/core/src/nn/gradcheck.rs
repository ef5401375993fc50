//! Central finite-difference verification of the analytic backward pass.
//!
//! Numerical derivatives are always taken on an `f64` copy of the network, so
//! checking an `f32` network measures the accuracy of the 32-bit training
//! path against a 64-bit reference.
//!
//! Parameters are sampled per layer among entries whose analytic gradient is
//! at least 1e-3 of the layer's largest, since near-zero entries only measure
//! round-off. Probes whose ±h perturbation flips any ReLU gate are discarded
//! and redrawn: the loss is not differentiable across such a kink.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::loss::mse_loss;
use crate::nn::network::{backward, forward, Gradients, Network};
use crate::nn::tensor::Tensor4;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Probes compared in each layer.
    pub checked_per_layer: Vec<usize>,
    pub skipped_kinks: usize,
}

pub fn analytic_gradients<T: Real>(
    net: &Network<T>,
    x: &Tensor4<T>,
    target: &Tensor4<T>,
) -> Result<Gradients<T>> {
    let (y, cache) = forward(net, x)?;
    let (_, dy) = mse_loss(&y, target)?;
    backward(net, &cache, &dy)
}

fn loss_and_gates(
    net: &Network<f64>,
    x: &Tensor4<f64>,
    t: &Tensor4<f64>,
) -> Result<(f64, Vec<bool>)> {
    let (y, cache) = forward(net, x)?;
    let (loss, _) = mse_loss(&y, t)?;
    let mut gates = Vec::new();
    for item in &cache.items {
        for (li, z) in item.preacts.iter().enumerate() {
            if net.layers[li].relu {
                gates.extend(z.iter().map(|&v| v > 0.0));
            }
        }
    }
    Ok((loss, gates))
}

fn param_mut(net: &mut Network<f64>, layer: usize, idx: usize) -> &mut f64 {
    let l = &mut net.layers[layer];
    let n_w = l.weights.len();
    if idx < n_w {
        &mut l.weights[idx]
    } else {
        &mut l.bias[idx - n_w]
    }
}

/// Compares `grads` (analytic, possibly doctored) against central differences
/// with step `h` at up to `per_layer` parameters of every layer.
pub fn compare_gradients<T: Real>(
    net: &Network<T>,
    x: &Tensor4<T>,
    target: &Tensor4<T>,
    grads: &Gradients<T>,
    h: f64,
    per_layer: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if grads.layers.len() != net.layers.len() {
        return Err(Error::Dimension(
            "gradient/network layer count mismatch".into(),
        ));
    }
    let mut net64: Network<f64> = net.cast();
    let x64: Tensor4<f64> = x.cast();
    let t64: Tensor4<f64> = target.cast();
    let (_, base_gates) = loss_and_gates(&net64, &x64, &t64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        checked_per_layer: vec![0; net.layers.len()],
        skipped_kinks: 0,
    };

    for li in 0..net.layers.len() {
        let g = &grads.layers[li];
        let analytic: Vec<f64> = g.dw.iter().chain(&g.db).map(|v| v.f64()).collect();
        let peak = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let mut candidates: Vec<usize> = (0..analytic.len())
            .filter(|&i| analytic[i].abs() >= 1e-3 * peak)
            .collect();
        candidates.shuffle(&mut rng);
        let mut done = 0;
        for &idx in &candidates {
            if done == per_layer {
                break;
            }
            let orig = *param_mut(&mut net64, li, idx);
            *param_mut(&mut net64, li, idx) = orig + h;
            let (lp, gp) = loss_and_gates(&net64, &x64, &t64)?;
            *param_mut(&mut net64, li, idx) = orig - h;
            let (lm, gm) = loss_and_gates(&net64, &x64, &t64)?;
            *param_mut(&mut net64, li, idx) = orig;
            if gp != base_gates || gm != base_gates {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-300);
            report.max_rel_err = report.max_rel_err.max(rel);
            report.checked += 1;
            report.checked_per_layer[li] += 1;
            done += 1;
        }
    }
    Ok(report)
}

pub fn grad_check<T: Real>(
    net: &Network<T>,
    x: &Tensor4<T>,
    target: &Tensor4<T>,
    h: f64,
    per_layer: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let grads = analytic_gradients(net, x, target)?;
    compare_gradients(net, x, target, &grads, h, per_layer, seed)
}
