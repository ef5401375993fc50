//! Quick built-in consistency checks, run by `apa selftest`.
//!
//! Each check compares a fast code path against a slow direct computation on
//! a small random case. It takes well under a second in an optimized build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{guided_filter, GuidedFilterParams};
use crate::io::{decode_lft, encode_lft};
use crate::lf::{Image, LightField};
use crate::metrics::{psnr, ssim, SsimParams};
use crate::nn::conv::{conv2d_forward, ConvLayer};
use crate::nn::gradcheck::grad_check;
use crate::nn::init::xavier_layer;
use crate::nn::network::Network;
use crate::nn::tensor::Tensor4;
use crate::noise::{add_awgn, NoiseConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64) -> SelfCheck {
    SelfCheck {
        name,
        passed: value < bound,
        detail: format!("{value:.3e} (< {bound:.0e})"),
    }
}

fn random_tensor(n: usize, c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor4<f64> {
    let data = (0..n * c * h * w)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor4::from_vec(n, c, h, w, data).expect("sized buffer")
}

fn conv_vs_loops(rng: &mut ChaCha8Rng) -> f64 {
    let (n, ci, co, h, w, k) = (2, 3, 4, 7, 9, 3);
    let mut layer: ConvLayer<f64> = xavier_layer(ci, co, k, false, rng);
    layer
        .bias
        .iter_mut()
        .for_each(|b| *b = rng.random_range(-0.5..0.5));
    let x = random_tensor(n, ci, h, w, rng);
    let y = conv2d_forward(&x, &layer).expect("valid shapes");
    let p = (k / 2) as isize;
    let mut worst = 0.0f64;
    for b in 0..n {
        for o in 0..co {
            for yy in 0..h {
                for xx in 0..w {
                    let mut acc = layer.bias[o];
                    for i in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = yy as isize + ky as isize - p;
                                let sx = xx as isize + kx as isize - p;
                                if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                    acc += layer.w_at(o, i, ky, kx)
                                        * x.at(b, i, sy as usize, sx as usize);
                                }
                            }
                        }
                    }
                    worst = worst.max((acc - y.at(b, o, yy, xx)).abs());
                }
            }
        }
    }
    worst
}

fn guided_vs_windows(rng: &mut ChaCha8Rng) -> f64 {
    let (w, h) = (20, 17);
    let g = Image::from_fn(w, h, |_, _| rng.random::<f32>());
    let j = Image::from_fn(w, h, |_, _| rng.random::<f32>());
    let params = GuidedFilterParams {
        radius: 2,
        epsilon: 1e-2,
    };
    let fast = guided_filter(&g, &j, &params).expect("same dims");
    let r = params.radius as isize;
    let window = |x: usize, y: usize| {
        let mut px = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let (sx, sy) = (x as isize + dx, y as isize + dy);
                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    px.push((sx as usize, sy as usize));
                }
            }
        }
        px
    };
    let mut a = vec![0.0f64; w * h];
    let mut b = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let px = window(x, y);
            let m = px.len() as f64;
            let mg = px.iter().map(|&(sx, sy)| g.get(sx, sy) as f64).sum::<f64>() / m;
            let mj = px.iter().map(|&(sx, sy)| j.get(sx, sy) as f64).sum::<f64>() / m;
            let var = px
                .iter()
                .map(|&(sx, sy)| (g.get(sx, sy) as f64 - mg).powi(2))
                .sum::<f64>()
                / m;
            let cov = px
                .iter()
                .map(|&(sx, sy)| (g.get(sx, sy) as f64 - mg) * (j.get(sx, sy) as f64 - mj))
                .sum::<f64>()
                / m;
            a[y * w + x] = cov / (var + params.epsilon);
            b[y * w + x] = mj - a[y * w + x] * mg;
        }
    }
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let px = window(x, y);
            let m = px.len() as f64;
            let ma = px.iter().map(|&(sx, sy)| a[sy * w + sx]).sum::<f64>() / m;
            let mb = px.iter().map(|&(sx, sy)| b[sy * w + sx]).sum::<f64>() / m;
            let want = ma * g.get(x, y) as f64 + mb;
            worst = worst.max((want - fast.get(x, y) as f64).abs());
        }
    }
    worst
}

fn gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut l1: ConvLayer<f64> = xavier_layer(2, 4, 3, true, rng);
    l1.bias.iter_mut().for_each(|b| *b = 0.1);
    let net = Network::new(vec![l1, xavier_layer(4, 1, 1, false, rng)]).expect("chained layers");
    let x = random_tensor(2, 2, 6, 6, rng);
    let t = random_tensor(2, 1, 6, 6, rng);
    grad_check(&net, &x, &t, 1e-6, 10, 5)
        .map(|r| r.max_rel_err)
        .unwrap_or(f64::INFINITY)
}

fn noise_std_error() -> f64 {
    let lf = LightField::filled(250, 200, 2, 2, 0.5).expect("positive dims");
    let noisy = add_awgn(&lf, &NoiseConfig::new(20.0, 3).expect("valid sigma"));
    let n = noisy.data().len() as f64;
    let var = noisy
        .data()
        .iter()
        .map(|&v| (v as f64 - 0.5).powi(2))
        .sum::<f64>()
        / n;
    (var.sqrt() * 255.0 / 20.0 - 1.0).abs()
}

pub fn run_selftest() -> Vec<SelfCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let img = Image::from_fn(24, 24, |_, _| rng.random::<f32>());
    let shifted = img.map(|v| v + 0.1);
    let lf = LightField::from_fn(5, 4, 2, 3, |s, v, x, y| {
        (s * 7 + v * 3 + x + y) as f32 * 0.01
    })
    .expect("positive dims");
    let round_trip = decode_lft(&encode_lft(&lf))
        .map(|back| back == lf)
        .unwrap_or(false);
    vec![
        check(
            "conv forward vs direct loops",
            conv_vs_loops(&mut rng),
            1e-12,
        ),
        check(
            "guided filter vs windowed sums",
            guided_vs_windows(&mut rng),
            1e-5,
        ),
        check(
            "backward vs finite differences",
            gradient_error(&mut rng),
            1e-6,
        ),
        check(
            "psnr of a 0.1 offset is 20 dB",
            (psnr(&img, &shifted, 1.0).unwrap_or(0.0) - 20.0).abs(),
            1e-4,
        ),
        check(
            "ssim of an image with itself is 1",
            (ssim(&img, &img, &SsimParams::default()).unwrap_or(0.0) - 1.0).abs(),
            1e-12,
        ),
        check("noise std relative error", noise_std_error(), 0.01),
        SelfCheck {
            name: "lft encode/decode round trip",
            passed: round_trip,
            detail: if round_trip {
                "identical".into()
            } else {
                "differs".into()
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
