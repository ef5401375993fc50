//! Stride-1 "same" convolution with zero padding.
//!
//! The input is copied into a zero-padded buffer with row pitch
//! `wp = w + 2p`. Computing the output on that pitch makes the input window
//! for kernel tap `(ky, kx)` a contiguous slice starting at `ky·wp + kx`, so
//! each tap is a single strided GEMM of shape `out × in × (h·wp)`. The
//! `2p` extra columns per output row are discarded.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor4;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub relu: bool,
    /// `[out_ch][in_ch][k][k]`
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

pub type ConvLayerParams = ConvLayer<f32>;

impl<T: Real> ConvLayer<T> {
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize, relu: bool) -> Result<Self> {
        let layer = ConvLayer {
            in_ch,
            out_ch,
            kernel,
            relu,
            weights: vec![T::zero(); out_ch * in_ch * kernel * kernel],
            bias: vec![T::zero(); out_ch],
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "kernel size must be odd, got {}",
                self.kernel
            )));
        }
        if self.in_ch == 0 || self.out_ch == 0 {
            return Err(Error::InvalidParam(
                "channel counts must be positive".into(),
            ));
        }
        if self.weights.len() != self.weight_len() || self.bias.len() != self.out_ch {
            return Err(Error::Dimension(format!(
                "layer {}->{} k={} has {} weights / {} biases",
                self.in_ch,
                self.out_ch,
                self.kernel,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self
            .weights
            .iter()
            .chain(&self.bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParam("non-finite layer parameter".into()));
        }
        Ok(())
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_ch
    }

    #[inline]
    pub fn w_at(&self, o: usize, i: usize, ky: usize, kx: usize) -> T {
        let k = self.kernel;
        self.weights[((o * self.in_ch + i) * k + ky) * k + kx]
    }

    pub fn cast<U: Real>(&self) -> ConvLayer<U> {
        ConvLayer {
            in_ch: self.in_ch,
            out_ch: self.out_ch,
            kernel: self.kernel,
            relu: self.relu,
            weights: self.weights.iter().map(|v| U::of(v.f64())).collect(),
            bias: self.bias.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}

#[derive(Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    pad: usize,
    pitch: usize,
    plane: usize,
}

impl Geometry {
    fn new(h: usize, w: usize, k: usize) -> Self {
        let pad = (k - 1) / 2;
        let pitch = w + 2 * pad;
        Geometry {
            h,
            w,
            pad,
            pitch,
            plane: (h + 2 * pad) * pitch + 2 * pad,
        }
    }

    fn ext_len(&self) -> usize {
        self.h * self.pitch
    }

    fn pad_input<T: Real>(&self, x: &[T], channels: usize) -> Vec<T> {
        let mut out = vec![T::zero(); channels * self.plane];
        for c in 0..channels {
            for y in 0..self.h {
                let src = &x[(c * self.h + y) * self.w..][..self.w];
                let dst = c * self.plane + (y + self.pad) * self.pitch + self.pad;
                out[dst..dst + self.w].copy_from_slice(src);
            }
        }
        out
    }
}

/// Pre-activation of one batch item: `x` is `[in_ch][h][w]`, the result is
/// `[out_ch][h][w]`.
pub fn conv_item_preact<T: Real>(layer: &ConvLayer<T>, x: &[T], h: usize, w: usize) -> Vec<T> {
    let k = layer.kernel;
    let g = Geometry::new(h, w, k);
    debug_assert_eq!(x.len(), layer.in_ch * h * w);
    let xpad = g.pad_input(x, layer.in_ch);
    let n_ext = g.ext_len();
    let mut ext = vec![T::zero(); layer.out_ch * n_ext];
    let kk = k * k;
    for ky in 0..k {
        for kx in 0..k {
            // SAFETY: rows of B span channel planes of `xpad`; the furthest
            // element read is (in_ch-1)·plane + (k-1)·(pitch+1) + h·pitch - 1,
            // which is < in_ch·plane by construction of `plane`.
            unsafe {
                T::gemm(
                    layer.out_ch,
                    layer.in_ch,
                    n_ext,
                    T::one(),
                    layer.weights.as_ptr().add(ky * k + kx),
                    (layer.in_ch * kk) as isize,
                    kk as isize,
                    xpad.as_ptr().add(ky * g.pitch + kx),
                    g.plane as isize,
                    1,
                    T::one(),
                    ext.as_mut_ptr(),
                    n_ext as isize,
                    1,
                );
            }
        }
    }
    let mut z = Vec::with_capacity(layer.out_ch * h * w);
    for o in 0..layer.out_ch {
        let b = layer.bias[o];
        for y in 0..h {
            let row = &ext[o * n_ext + y * g.pitch..][..w];
            z.extend(row.iter().map(|&v| v + b));
        }
    }
    z
}

pub fn relu_inplace<T: Real>(v: &mut [T]) {
    for x in v {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}

/// Gradients of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

impl<T: Real> LayerGrad<T> {
    pub fn zeros_like(layer: &ConvLayer<T>) -> Self {
        LayerGrad {
            dw: vec![T::zero(); layer.weight_len()],
            db: vec![T::zero(); layer.out_ch],
        }
    }

    pub fn add_assign(&mut self, other: &LayerGrad<T>) {
        for (a, &b) in self.dw.iter_mut().zip(&other.dw) {
            *a += b;
        }
        for (a, &b) in self.db.iter_mut().zip(&other.db) {
            *a += b;
        }
    }
}

/// Backward pass of one item given the gradient w.r.t. the pre-activation.
/// Accumulates into `grad`; returns the input gradient when `want_dx`.
pub fn conv_item_backward<T: Real>(
    layer: &ConvLayer<T>,
    x: &[T],
    dz: &[T],
    h: usize,
    w: usize,
    grad: &mut LayerGrad<T>,
    want_dx: bool,
) -> Option<Vec<T>> {
    let k = layer.kernel;
    let kk = k * k;
    let g = Geometry::new(h, w, k);
    let n_ext = g.ext_len();
    let xpad = g.pad_input(x, layer.in_ch);

    let mut dz_ext = vec![T::zero(); layer.out_ch * n_ext];
    for o in 0..layer.out_ch {
        let mut acc = T::zero();
        for y in 0..h {
            let src = &dz[(o * h + y) * w..][..w];
            dz_ext[o * n_ext + y * g.pitch..][..w].copy_from_slice(src);
            for &v in src {
                acc += v;
            }
        }
        grad.db[o] += acc;
    }

    for ky in 0..k {
        for kx in 0..k {
            // SAFETY: same read bound on `xpad` as the forward pass; writes
            // land on the (ky, kx) tap of every [o][i] kernel in `dw`.
            unsafe {
                T::gemm(
                    layer.out_ch,
                    n_ext,
                    layer.in_ch,
                    T::one(),
                    dz_ext.as_ptr(),
                    n_ext as isize,
                    1,
                    xpad.as_ptr().add(ky * g.pitch + kx),
                    1,
                    g.plane as isize,
                    T::one(),
                    grad.dw.as_mut_ptr().add(ky * k + kx),
                    (layer.in_ch * kk) as isize,
                    kk as isize,
                );
            }
        }
    }

    if !want_dx {
        return None;
    }
    let mut dxpad = vec![T::zero(); layer.in_ch * g.plane];
    for ky in 0..k {
        for kx in 0..k {
            // SAFETY: the written window of `dxpad` mirrors the forward read
            // window of `xpad`, which is in bounds.
            unsafe {
                T::gemm(
                    layer.in_ch,
                    layer.out_ch,
                    n_ext,
                    T::one(),
                    layer.weights.as_ptr().add(ky * k + kx),
                    kk as isize,
                    (layer.in_ch * kk) as isize,
                    dz_ext.as_ptr(),
                    n_ext as isize,
                    1,
                    T::one(),
                    dxpad.as_mut_ptr().add(ky * g.pitch + kx),
                    g.plane as isize,
                    1,
                );
            }
        }
    }
    let mut dx = Vec::with_capacity(layer.in_ch * h * w);
    for i in 0..layer.in_ch {
        for y in 0..h {
            let start = i * g.plane + (y + g.pad) * g.pitch + g.pad;
            dx.extend_from_slice(&dxpad[start..start + w]);
        }
    }
    Some(dx)
}

fn check_input<T: Real>(x: &Tensor4<T>, layer: &ConvLayer<T>) -> Result<()> {
    if x.c != layer.in_ch {
        return Err(Error::Dimension(format!(
            "input has {} channels, layer expects {}",
            x.c, layer.in_ch
        )));
    }
    Ok(())
}

/// Forward pass over a batch, including the ReLU when the layer has one.
pub fn conv2d_forward<T: Real>(x: &Tensor4<T>, layer: &ConvLayer<T>) -> Result<Tensor4<T>> {
    check_input(x, layer)?;
    let mut data = Vec::with_capacity(x.n * layer.out_ch * x.h * x.w);
    for i in 0..x.n {
        let mut z = conv_item_preact(layer, x.item(i), x.h, x.w);
        if layer.relu {
            relu_inplace(&mut z);
        }
        data.extend(z);
    }
    Tensor4::from_vec(x.n, layer.out_ch, x.h, x.w, data)
}

/// Exact gradients of [`conv2d_forward`]. `dy` is the gradient with respect to
/// the layer output; the ReLU gate is recomputed from the forward
/// pre-activation.
pub fn conv2d_backward<T: Real>(
    x: &Tensor4<T>,
    layer: &ConvLayer<T>,
    dy: &Tensor4<T>,
) -> Result<(Tensor4<T>, LayerGrad<T>)> {
    check_input(x, layer)?;
    if dy.dims() != [x.n, layer.out_ch, x.h, x.w] {
        return Err(Error::Dimension(format!(
            "dy is {:?}, expected {:?}",
            dy.dims(),
            [x.n, layer.out_ch, x.h, x.w]
        )));
    }
    let mut grad = LayerGrad::zeros_like(layer);
    let mut dx = Vec::with_capacity(x.data.len());
    for i in 0..x.n {
        let mut dz = dy.item(i).to_vec();
        if layer.relu {
            let z = conv_item_preact(layer, x.item(i), x.h, x.w);
            gate_relu(&mut dz, &z);
        }
        let dxi = conv_item_backward(layer, x.item(i), &dz, x.h, x.w, &mut grad, true)
            .expect("dx requested");
        dx.extend(dxi);
    }
    Ok((Tensor4::from_vec(x.n, x.c, x.h, x.w, dx)?, grad))
}

pub(crate) fn gate_relu<T: Real>(dz: &mut [T], z: &[T]) {
    for (d, &zv) in dz.iter_mut().zip(z) {
        if !(zv > T::zero()) {
            *d = T::zero();
        }
    }
}
