use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::conv::{
    conv_item_backward, conv_item_preact, gate_relu, relu_inplace, ConvLayer, LayerGrad,
};
use crate::nn::tensor::Tensor4;
use crate::real::Real;

/// An ordered chain of convolution layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub layers: Vec<ConvLayer<T>>,
}

pub type NetworkDef = Network<f32>;

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<ConvLayer<T>>) -> Result<Self> {
        let net = Network { layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParam("network has no layers".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_ch != pair[1].in_ch {
                return Err(Error::Dimension(format!(
                    "layer {i} outputs {} channels but layer {} expects {}",
                    pair[0].out_ch,
                    i + 1,
                    pair[1].in_ch
                )));
            }
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().unwrap().out_ch
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }

    /// Order-sensitive hash of every parameter bit pattern and the layer
    /// structure; used to detect caches produced by a different network.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(PRIME);
        };
        for l in &self.layers {
            eat(l.in_ch as u64);
            eat(l.out_ch as u64);
            eat(l.kernel as u64);
            eat(l.relu as u64);
            for v in l.weights.iter().chain(&l.bias) {
                eat(v.f64().to_bits());
            }
        }
        h
    }

    fn check_input(&self, c: usize) -> Result<()> {
        if c != self.in_channels() {
            return Err(Error::Dimension(format!(
                "input has {c} channels, network expects {}",
                self.in_channels()
            )));
        }
        Ok(())
    }

    /// Forward pass of a single `[c][h][w]` item, keeping per-layer inputs and
    /// pre-activations.
    pub fn forward_item(&self, x: &[T], h: usize, w: usize) -> ItemCache<T> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for l in &self.layers {
            let z = conv_item_preact(l, &cur, h, w);
            let mut a = z.clone();
            if l.relu {
                relu_inplace(&mut a);
            }
            inputs.push(std::mem::replace(&mut cur, a));
            preacts.push(z);
        }
        ItemCache {
            h,
            w,
            inputs,
            preacts,
            output: cur,
        }
    }

    /// Output only, without retaining intermediates.
    pub fn infer_item(&self, x: &[T], h: usize, w: usize) -> Vec<T> {
        let mut cur = x.to_vec();
        for l in &self.layers {
            cur = conv_item_preact(l, &cur, h, w);
            if l.relu {
                relu_inplace(&mut cur);
            }
        }
        cur
    }

    /// Backward pass of a single item given `dy` w.r.t. the network output.
    pub fn backward_item(&self, cache: &ItemCache<T>, dy: &[T]) -> Gradients<T> {
        let mut grads = Gradients::zeros_like(self);
        let mut d = dy.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if l.relu {
                gate_relu(&mut d, &cache.preacts[i]);
            }
            let dx = conv_item_backward(
                l,
                &cache.inputs[i],
                &d,
                cache.h,
                cache.w,
                &mut grads.layers[i],
                i > 0,
            );
            if let Some(dx) = dx {
                d = dx;
            }
        }
        grads
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x.c)?;
        let outs: Vec<Vec<T>> = (0..x.n)
            .into_par_iter()
            .map(|i| self.infer_item(x.item(i), x.h, x.w))
            .collect();
        Tensor4::from_vec(x.n, self.out_channels(), x.h, x.w, outs.concat())
    }
}

/// Per-item activations retained by the forward pass.
#[derive(Debug, Clone)]
pub struct ItemCache<T> {
    pub h: usize,
    pub w: usize,
    /// Input of every layer; `inputs[0]` is the network input.
    pub inputs: Vec<Vec<T>>,
    /// Pre-activation of every layer.
    pub preacts: Vec<Vec<T>>,
    pub output: Vec<T>,
}

/// Batch forward cache, tied to the network that produced it.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    fingerprint: u64,
    pub items: Vec<ItemCache<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Gradients {
            layers: net.layers.iter().map(LayerGrad::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }

    pub fn is_all_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.dw.iter().chain(&l.db).all(|v| *v == T::zero()))
    }
}

/// Forward pass over a batch. Items run in parallel; results are ordered.
pub fn forward<T: Real>(net: &Network<T>, x: &Tensor4<T>) -> Result<(Tensor4<T>, ForwardCache<T>)> {
    net.check_input(x.c)?;
    let items: Vec<ItemCache<T>> = (0..x.n)
        .into_par_iter()
        .map(|i| net.forward_item(x.item(i), x.h, x.w))
        .collect();
    let mut data = Vec::with_capacity(x.n * net.out_channels() * x.h * x.w);
    for it in &items {
        data.extend_from_slice(&it.output);
    }
    let y = Tensor4::from_vec(x.n, net.out_channels(), x.h, x.w, data)?;
    Ok((
        y,
        ForwardCache {
            fingerprint: net.fingerprint(),
            items,
        },
    ))
}

/// Chain rule through every layer. Per-item gradients are summed in item
/// order, so the result does not depend on the thread count.
pub fn backward<T: Real>(
    net: &Network<T>,
    cache: &ForwardCache<T>,
    dy: &Tensor4<T>,
) -> Result<Gradients<T>> {
    if cache.fingerprint != net.fingerprint() {
        return Err(Error::InvalidParam(
            "stale forward cache: network changed since forward".into(),
        ));
    }
    let first = cache
        .items
        .first()
        .ok_or_else(|| Error::Dimension("empty forward cache".into()))?;
    if dy.dims() != [cache.items.len(), net.out_channels(), first.h, first.w] {
        return Err(Error::Dimension(format!(
            "dy is {:?}, expected {:?}",
            dy.dims(),
            [cache.items.len(), net.out_channels(), first.h, first.w]
        )));
    }
    let per_item: Vec<Gradients<T>> = (0..dy.n)
        .into_par_iter()
        .map(|i| net.backward_item(&cache.items[i], dy.item(i)))
        .collect();
    let mut total = Gradients::zeros_like(net);
    for g in &per_item {
        total.add_assign(g);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv::{conv2d_backward, conv2d_forward};
    use crate::nn::init::xavier_layer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(chain: &[(usize, usize, usize, bool)], seed: u64) -> Network<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = chain
            .iter()
            .map(|&(i, o, k, r)| {
                let mut l = xavier_layer::<f32, _>(i, o, k, r, &mut rng);
                l.bias
                    .iter_mut()
                    .enumerate()
                    .for_each(|(j, b)| *b = 0.01 * j as f32);
                l
            })
            .collect();
        Network::new(layers).unwrap()
    }

    fn input(n: usize, c: usize, h: usize, w: usize) -> Tensor4<f32> {
        let data = (0..n * c * h * w)
            .map(|i| ((i * 37 % 101) as f32) / 101.0)
            .collect();
        Tensor4::from_vec(n, c, h, w, data).unwrap()
    }

    #[test]
    fn zero_network_gives_zero() {
        let net = Network::new(vec![
            ConvLayer::<f32>::zeros(2, 3, 3, true).unwrap(),
            ConvLayer::<f32>::zeros(3, 1, 1, false).unwrap(),
        ])
        .unwrap();
        let (y, _) = forward(&net, &input(2, 2, 5, 5)).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composition_matches_layerwise() {
        let net = random_net(
            &[
                (3, 6, 11, true),
                (6, 5, 5, true),
                (5, 4, 3, true),
                (4, 2, 1, false),
            ],
            1,
        );
        let x = input(2, 3, 13, 12);
        let (y, _) = forward(&net, &x).unwrap();
        let mut cur = x.clone();
        for l in &net.layers {
            cur = conv2d_forward(&cur, l).unwrap();
        }
        assert_eq!(y, cur);
        assert_eq!(net.infer(&x).unwrap(), cur);
    }

    #[test]
    fn single_layer_backward_matches_conv_backward() {
        let net = random_net(&[(2, 3, 5, true)], 2);
        let x = input(2, 2, 7, 6);
        let (_, cache) = forward(&net, &x).unwrap();
        let dy = input(2, 3, 7, 6);
        let g = backward(&net, &cache, &dy).unwrap();
        let (_, lg) = conv2d_backward(&x, &net.layers[0], &dy).unwrap();
        for (a, b) in g.layers[0].dw.iter().zip(&lg.dw) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
        }
        assert_eq!(g.layers[0].db, lg.db);
    }

    #[test]
    fn zero_dy_zero_grads() {
        let net = random_net(&[(2, 3, 3, true), (3, 1, 1, false)], 3);
        let x = input(1, 2, 6, 6);
        let (_, cache) = forward(&net, &x).unwrap();
        let g = backward(&net, &cache, &Tensor4::zeros(1, 1, 6, 6)).unwrap();
        assert!(g.is_all_zero());
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = random_net(&[(1, 1, 3, false)], 4);
        let x = input(1, 1, 4, 4);
        let (_, cache) = forward(&net, &x).unwrap();
        net.layers[0].weights[0] += 1.0;
        assert!(backward(&net, &cache, &Tensor4::zeros(1, 1, 4, 4)).is_err());
    }

    #[test]
    fn chain_mismatch_rejected() {
        let r = Network::new(vec![
            ConvLayer::<f32>::zeros(2, 3, 3, true).unwrap(),
            ConvLayer::<f32>::zeros(4, 1, 1, false).unwrap(),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn linear_without_relu() {
        let net = random_net(&[(2, 3, 3, false), (3, 2, 1, false)], 5);
        let mut net = net;
        net.layers
            .iter_mut()
            .for_each(|l| l.bias.iter_mut().for_each(|b| *b = 0.0));
        let x1 = input(1, 2, 6, 7);
        let x2 = Tensor4::from_vec(
            1,
            2,
            6,
            7,
            x1.data.iter().map(|v| (v * 7.0).sin()).collect(),
        )
        .unwrap();
        let (a, b) = (0.7f32, -1.3f32);
        let mix = Tensor4::from_vec(
            1,
            2,
            6,
            7,
            x1.data
                .iter()
                .zip(&x2.data)
                .map(|(p, q)| a * p + b * q)
                .collect(),
        )
        .unwrap();
        let y = net.infer(&mix).unwrap();
        let y1 = net.infer(&x1).unwrap();
        let y2 = net.infer(&x2).unwrap();
        for i in 0..y.data.len() {
            assert!((y.data[i] - (a * y1.data[i] + b * y2.data[i])).abs() < 1e-5);
        }
    }

    #[test]
    fn interior_translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let l = xavier_layer::<f64, _>(1, 2, 3, false, &mut rng);
        let (h, w) = (10, 10);
        let base: Vec<f64> = (0..h * w).map(|i| ((i * 13 % 17) as f64).sin()).collect();
        let mut shifted = vec![0.0; h * w];
        for y in 1..h {
            for x in 0..w {
                shifted[y * w + x] = base[(y - 1) * w + x];
            }
        }
        let ya = conv_item_preact(&l, &base, h, w);
        let yb = conv_item_preact(&l, &shifted, h, w);
        let k = l.kernel;
        for o in 0..2 {
            for y in k..h - k {
                for x in k..w - k {
                    let a = ya[(o * h + y - 1) * w + x];
                    let b = yb[(o * h + y) * w + x];
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
