//! Closed-form parallax features: angular means, the isotropic average,
//! guided-filter normalization and the Gaussian-smoothed per-view input.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lf::{check_same, Image, LightField, Plane, Stack};
use crate::real::Real;

/// Angular axis selector. `Vertical` (axis 4) averages over `v` and yields
/// one plane per horizontal index `s`; `Horizontal` (axis 3) averages over
/// `s` and yields one plane per `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularAxis {
    Horizontal,
    Vertical,
}

impl AngularAxis {
    /// Maps the 1-based tensor dimension index (3 = horizontal angular,
    /// 4 = vertical angular) to an axis.
    pub fn from_dim(m: usize) -> Result<Self> {
        match m {
            3 => Ok(AngularAxis::Horizontal),
            4 => Ok(AngularAxis::Vertical),
            _ => Err(Error::InvalidParam(format!(
                "angular mean dimension must be 3 or 4, got {m}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedFilterParams {
    pub radius: usize,
    pub epsilon: f64,
}

impl Default for GuidedFilterParams {
    fn default() -> Self {
        GuidedFilterParams {
            radius: 8,
            epsilon: 1e-4,
        }
    }
}

impl GuidedFilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::InvalidParam(
                "guided filter radius must be >= 1".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParam(format!(
                "guided filter epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub sigma_g: f64,
    pub radius: usize,
}

impl GaussianParams {
    pub fn new(sigma_g: f64) -> Self {
        GaussianParams {
            sigma_g,
            radius: (3.0 * sigma_g).ceil() as usize,
        }
    }

    /// Default smoothing scale for a noise level on the [0,255] scale:
    /// 1.0 / 1.5 / 2.5 for 10 / 20 / 50, nearest level otherwise.
    pub fn for_sigma(sigma_255: f64) -> Self {
        let levels = [(10.0, 1.0), (20.0, 1.5), (50.0, 2.5)];
        let (_, sg) = levels
            .iter()
            .copied()
            .min_by(|a, b| (a.0 - sigma_255).abs().total_cmp(&(b.0 - sigma_255).abs()))
            .unwrap();
        Self::new(sg)
    }

    /// Normalized 1D kernel of length `2·radius + 1`.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius as isize;
        if self.sigma_g <= 0.0 {
            let mut k = vec![0.0; 2 * self.radius + 1];
            k[self.radius] = 1.0;
            return k;
        }
        let two_s2 = 2.0 * self.sigma_g * self.sigma_g;
        let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / two_s2).exp()).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }
}

/// Mean along one angular axis. Accumulation is in f64.
pub fn angular_mean(lf: &LightField, axis: AngularAxis) -> Stack {
    let (w, h, n_h, n_v) = lf.dims();
    let npx = w * h;
    let (channels, count) = match axis {
        AngularAxis::Vertical => (n_h, n_v),
        AngularAxis::Horizontal => (n_v, n_h),
    };
    let mut acc = vec![0.0f64; channels * npx];
    for v in 0..n_v {
        for s in 0..n_h {
            let c = match axis {
                AngularAxis::Vertical => s,
                AngularAxis::Horizontal => v,
            };
            let dst = &mut acc[c * npx..(c + 1) * npx];
            for (d, &p) in dst.iter_mut().zip(lf.view(v * n_h + s)) {
                *d += p as f64;
            }
        }
    }
    let inv = 1.0 / count as f64;
    Stack {
        w,
        h,
        channels,
        data: acc.into_iter().map(|v| (v * inv) as f32).collect(),
    }
}

/// Anisotropic parallax features `(x_h, x_v)`: `x_h` has one plane per
/// horizontal index (averaged over `v`), `x_v` one plane per vertical index.
pub fn compute_apa(lf: &LightField) -> (Stack, Stack) {
    (
        angular_mean(lf, AngularAxis::Vertical),
        angular_mean(lf, AngularAxis::Horizontal),
    )
}

/// Isotropic average over both angular axes: horizontal mean first, then the
/// vertical mean of the result.
pub fn compute_isotropic(lf: &LightField) -> Image {
    mean_of_channels(&angular_mean(lf, AngularAxis::Horizontal))
}

pub(crate) fn mean_of_channels(stack: &Stack) -> Image {
    let npx = stack.w * stack.h;
    let mut acc = vec![0.0f64; npx];
    for c in 0..stack.channels {
        for (a, &p) in acc.iter_mut().zip(stack.channel(c)) {
            *a += p as f64;
        }
    }
    let inv = 1.0 / stack.channels as f64;
    Plane {
        w: stack.w,
        h: stack.h,
        data: acc.into_iter().map(|v| (v * inv) as f32).collect(),
    }
}

/// Summed-area table with a zero first row and column.
pub struct IntegralImage {
    w: usize,
    h: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new<T: Real>(img: &Plane<T>) -> Self {
        let (w, h) = (img.w, img.h);
        let stride = w + 1;
        let mut sums = vec![0.0f64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0f64;
            for x in 0..w {
                row += img.data[y * w + x].f64();
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        IntegralImage { w, h, sums }
    }

    /// Sum over `[x0, x1) × [y0, y1)`.
    #[inline]
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.w + 1;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
            + self.sums[y0 * s + x0]
    }

    /// Mean over the `(2r+1)²` box centred at every pixel, truncated at the
    /// image border and normalized by the number of pixels actually covered.
    pub fn box_mean(&self, radius: usize) -> Plane<f64> {
        let (w, h) = (self.w, self.h);
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            let y0 = y.saturating_sub(radius);
            let y1 = (y + radius + 1).min(h);
            for x in 0..w {
                let x0 = x.saturating_sub(radius);
                let x1 = (x + radius + 1).min(w);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                out.push(self.rect_sum(x0, y0, x1, y1) / n);
            }
        }
        Plane { w, h, data: out }
    }
}

pub fn box_mean<T: Real>(img: &Plane<T>, radius: usize) -> Plane<f64> {
    IntegralImage::new(img).box_mean(radius)
}

/// Guided filter of `input` using `guide`, O(w·h) through integral images.
/// Window statistics are accumulated in f64 regardless of `T`.
pub fn guided_filter<T: Real>(
    guide: &Plane<T>,
    input: &Plane<T>,
    params: &GuidedFilterParams,
) -> Result<Plane<T>> {
    check_same(guide, input, "guided_filter")?;
    params.validate()?;
    let r = params.radius;
    let eps = params.epsilon;
    let n = guide.data.len();

    let gi: Plane<f64> = Plane {
        w: guide.w,
        h: guide.h,
        data: (0..n)
            .map(|i| guide.data[i].f64() * input.data[i].f64())
            .collect(),
    };
    let gg: Plane<f64> = guide.map(|v| v.f64() * v.f64());

    let mean_g = box_mean(guide, r);
    let mean_j = box_mean(input, r);
    let corr_gj = box_mean(&gi, r);
    let corr_gg = box_mean(&gg, r);

    let mut a = Plane::<f64>::new(guide.w, guide.h);
    let mut b = Plane::<f64>::new(guide.w, guide.h);
    for i in 0..n {
        let var = corr_gg.data[i] - mean_g.data[i] * mean_g.data[i];
        let cov = corr_gj.data[i] - mean_g.data[i] * mean_j.data[i];
        let ai = cov / (var + eps);
        a.data[i] = ai;
        b.data[i] = mean_j.data[i] - ai * mean_g.data[i];
    }
    let mean_a = box_mean(&a, r);
    let mean_b = box_mean(&b, r);
    Ok(Plane {
        w: guide.w,
        h: guide.h,
        data: (0..n)
            .map(|i| T::of(mean_a.data[i] * guide.data[i].f64() + mean_b.data[i]))
            .collect(),
    })
}

/// Normalized APA features: each slice guides a filtering of `x_avg`, and
/// `x_avg` is subtracted from the result.
pub fn normalize_apa(
    x_h: &Stack,
    x_v: &Stack,
    x_avg: &Image,
    params: &GuidedFilterParams,
) -> Result<(Stack, Stack)> {
    params.validate()?;
    let norm = |x: &Stack| -> Result<Stack> {
        if x.w != x_avg.w || x.h != x_avg.h {
            return Err(Error::Dimension(format!(
                "feature slices {}x{} vs x_avg {}x{}",
                x.w, x.h, x_avg.w, x_avg.h
            )));
        }
        let slices = (0..x.channels)
            .into_par_iter()
            .map(|c| {
                let mut q = guided_filter(&x.plane(c), x_avg, params)?;
                for (qv, &a) in q.data.iter_mut().zip(&x_avg.data) {
                    *qv -= a;
                }
                Ok(q)
            })
            .collect::<Result<Vec<_>>>()?;
        Stack::from_planes(&slices)
    };
    Ok((norm(x_h)?, norm(x_v)?))
}

/// Separable Gaussian smoothing; at the border the kernel is truncated and
/// renormalized over the samples that exist.
pub fn gaussian_smooth<T: Real>(img: &Plane<T>, params: &GaussianParams) -> Plane<T> {
    let kernel = params.kernel();
    let r = params.radius as isize;
    let (w, h) = (img.w as isize, img.h as isize);
    let mut tmp = vec![0.0f64; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for k in -r..=r {
                let xx = x + k;
                if xx >= 0 && xx < w {
                    let kw = kernel[(k + r) as usize];
                    acc += kw * img.data[(y * w + xx) as usize].f64();
                    wsum += kw;
                }
            }
            tmp[(y * w + x) as usize] = acc / wsum;
        }
    }
    let mut out = Vec::with_capacity(img.data.len());
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for k in -r..=r {
                let yy = y + k;
                if yy >= 0 && yy < h {
                    let kw = kernel[(k + r) as usize];
                    acc += kw * tmp[(yy * w + x) as usize];
                    wsum += kw;
                }
            }
            out.push(T::of(acc / wsum));
        }
    }
    Plane {
        w: img.w,
        h: img.h,
        data: out,
    }
}

pub fn gaussian_smooth_sai(sai: &Image, params: &GaussianParams) -> Image {
    gaussian_smooth(sai, params)
}

/// The feature bundle derived from one (noisy) light field.
#[derive(Debug, Clone, PartialEq)]
pub struct ApaFeatures {
    pub x_h: Stack,
    pub x_v: Stack,
    pub x_avg: Image,
    pub x_h_norm: Stack,
    pub x_v_norm: Stack,
}

impl ApaFeatures {
    pub fn compute(lf: &LightField, params: &GuidedFilterParams) -> Result<Self> {
        let (x_h, x_v) = compute_apa(lf);
        let x_avg = mean_of_channels(&x_v);
        let (x_h_norm, x_v_norm) = normalize_apa(&x_h, &x_v, &x_avg, params)?;
        Ok(ApaFeatures {
            x_h,
            x_v,
            x_avg,
            x_h_norm,
            x_v_norm,
        })
    }
}

/// `x_h_norm` slices followed by `x_v_norm` slices.
pub fn build_syn_input(f: &ApaFeatures) -> Stack {
    let mut data = Vec::with_capacity(f.x_h_norm.data.len() + f.x_v_norm.data.len());
    data.extend_from_slice(&f.x_h_norm.data);
    data.extend_from_slice(&f.x_v_norm.data);
    Stack {
        w: f.x_h_norm.w,
        h: f.x_h_norm.h,
        channels: f.x_h_norm.channels + f.x_v_norm.channels,
        data,
    }
}

/// Two-channel view-Net input: `z - x_avg`, then `x_syn`.
pub fn build_view_input(z: &Image, x_avg: &Image, x_syn: &Image) -> Result<Stack> {
    check_same(z, x_avg, "build_view_input")?;
    check_same(z, x_syn, "build_view_input")?;
    let mut data = Vec::with_capacity(2 * z.data.len());
    data.extend(z.data.iter().zip(&x_avg.data).map(|(a, b)| a - b));
    data.extend_from_slice(&x_syn.data);
    Ok(Stack {
        w: z.w,
        h: z.h,
        channels: 2,
        data,
    })
}
