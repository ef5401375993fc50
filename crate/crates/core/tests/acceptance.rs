//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Every reference value is computed here from first principles
//! rather than through the library path under test.
//!
//! Run alone with `cargo test -p apa-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use apa_core::features::{
    angular_mean, guided_filter, AngularAxis, ApaFeatures, GuidedFilterParams,
};
use apa_core::io::{encode_lft, save_lft};
use apa_core::lf::Plane;
use apa_core::metrics::{
    default_thresholds, lf_quality, parallax_pr, pr_dominance, psnr, ssim, PrCurve, SsimParams,
    DEFAULT_TAU_GT,
};
use apa_core::nets::{
    baseline_avg_all, build_syn_net, build_view_net, denoise_lf, train_syn, train_view, SynMode,
    SynModel, SynNetConfig, TrainConfig, ViewModel, ViewNetConfig,
};
use apa_core::nn::{
    conv2d_backward, conv2d_forward, grad_check, train_network, xavier_layer, ConvLayer, Network,
    Tensor4, TrainHyper,
};
use apa_core::noise::{add_awgn, NoiseConfig};
use apa_core::toy::{toy_scene, ToySceneParams};
use apa_core::{Image, LightField, Stack};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor4<f64> {
    let data = (0..n * c * h * w)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor4::from_vec(n, c, h, w, data).unwrap()
}

// ---------------------------------------------------------------- criterion 1

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let syn_cfg = |mode| SynNetConfig {
        hidden: [6, 6, 4],
        mode,
    };
    let nets: Vec<(&str, Network<f32>)> = vec![
        (
            "syn/residual",
            build_syn_net(2, 2, &syn_cfg(SynMode::Residual), &mut rng).unwrap(),
        ),
        (
            "syn/absolute",
            build_syn_net(2, 2, &syn_cfg(SynMode::Absolute), &mut rng).unwrap(),
        ),
        (
            "view",
            build_view_net(
                &ViewNetConfig {
                    hidden: [6, 6, 12],
                    per_sai: false,
                },
                &mut rng,
            )
            .unwrap(),
        ),
    ];
    let mut worst64 = 0.0f64;
    let mut worst32 = 0.0f64;
    let mut min_checked = usize::MAX;
    for (i, (_, net32)) in nets.into_iter().enumerate() {
        // nonzero biases so hidden ReLUs are not all on the same side
        let mut net32 = net32;
        for l in &mut net32.layers {
            l.bias
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
        let (cin, cout) = (net32.in_channels(), net32.out_channels());
        let x = rand_tensor(&mut rng, 2, cin, 14, 14);
        let t = rand_tensor(&mut rng, 2, cout, 14, 14);
        let net64 = net32.cast::<f64>();
        let r64 = grad_check(&net64, &x, &t, 1e-5, 10, i as u64).unwrap();
        let r32 = grad_check(
            &net32,
            &x.cast::<f32>(),
            &t.cast::<f32>(),
            1e-5,
            10,
            i as u64,
        )
        .unwrap();
        worst64 = worst64.max(r64.max_rel_err);
        worst32 = worst32.max(r32.max_rel_err);
        let fewest = r64
            .checked_per_layer
            .iter()
            .chain(&r32.checked_per_layer)
            .copied()
            .min()
            .unwrap_or(0);
        min_checked = min_checked.min(fewest);
    }
    outcome(
        worst64 < 1e-6 && worst32 < 1e-3 && min_checked >= 10,
        format!("64-bit max rel err {worst64:.2e} (< 1e-6), 32-bit {worst32:.2e} (< 1e-3), >= {min_checked} params/layer"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn conv_loops_forward(x: &Tensor4<f64>, l: &ConvLayer<f64>) -> Vec<f64> {
    let p = (l.kernel / 2) as isize;
    let mut y = vec![0.0; x.n * l.out_ch * x.h * x.w];
    for n in 0..x.n {
        for o in 0..l.out_ch {
            for r in 0..x.h {
                for c in 0..x.w {
                    let mut acc = l.bias[o];
                    for i in 0..l.in_ch {
                        for ky in 0..l.kernel {
                            for kx in 0..l.kernel {
                                let (sy, sx) =
                                    (r as isize + ky as isize - p, c as isize + kx as isize - p);
                                if sy >= 0 && sx >= 0 && (sy as usize) < x.h && (sx as usize) < x.w
                                {
                                    acc += l.weights
                                        [((o * l.in_ch + i) * l.kernel + ky) * l.kernel + kx]
                                        * x.data[((n * x.c + i) * x.h + sy as usize) * x.w
                                            + sx as usize];
                                }
                            }
                        }
                    }
                    y[((n * l.out_ch + o) * x.h + r) * x.w + c] = acc;
                }
            }
        }
    }
    y
}

/// `(dx, dw, db)` by scattering every output gradient through the same loops.
fn conv_loops_backward(
    x: &Tensor4<f64>,
    l: &ConvLayer<f64>,
    dy: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = (l.kernel / 2) as isize;
    let mut dx = vec![0.0; x.data.len()];
    let mut dw = vec![0.0; l.weights.len()];
    let mut db = vec![0.0; l.out_ch];
    for n in 0..x.n {
        for o in 0..l.out_ch {
            for r in 0..x.h {
                for c in 0..x.w {
                    let g = dy[((n * l.out_ch + o) * x.h + r) * x.w + c];
                    db[o] += g;
                    for i in 0..l.in_ch {
                        for ky in 0..l.kernel {
                            for kx in 0..l.kernel {
                                let (sy, sx) =
                                    (r as isize + ky as isize - p, c as isize + kx as isize - p);
                                if sy >= 0 && sx >= 0 && (sy as usize) < x.h && (sx as usize) < x.w
                                {
                                    let wi = ((o * l.in_ch + i) * l.kernel + ky) * l.kernel + kx;
                                    let xi =
                                        ((n * x.c + i) * x.h + sy as usize) * x.w + sx as usize;
                                    dw[wi] += g * x.data[xi];
                                    dx[xi] += g * l.weights[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

fn conv_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let kernels = [1, 3, 5, 11];
    let mut worst = 0.0f64;
    let cases = 24;
    for case in 0..cases {
        let k = kernels[case % 4];
        let (n, ci, co) = (
            rng.random_range(1..=3),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        );
        // includes images smaller than the kernel
        let (h, w) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let mut layer: ConvLayer<f64> = xavier_layer(ci, co, k, false, &mut rng);
        layer
            .bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        let x = rand_tensor(&mut rng, n, ci, h, w);
        let dy = rand_tensor(&mut rng, n, co, h, w);
        let y = conv2d_forward(&x, &layer).unwrap();
        let (dx, g) = conv2d_backward(&x, &layer, &dy).unwrap();
        let (rdx, rdw, rdb) = conv_loops_backward(&x, &layer, &dy.data);
        worst = worst
            .max(max_abs_diff(&y.data, &conv_loops_forward(&x, &layer)))
            .max(max_abs_diff(&dx.data, &rdx))
            .max(max_abs_diff(&g.dw, &rdw))
            .max(max_abs_diff(&g.db, &rdb));
    }
    outcome(
        worst < 1e-6,
        format!("{cases} cases, k in {{1,3,5,11}}, max abs err {worst:.2e} (< 1e-6)"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn guided_brute(g: &Plane<f64>, j: &Plane<f64>, r: usize, eps: f64) -> Vec<f64> {
    let (w, h) = (g.w, g.h);
    let window = |x: usize, y: usize| {
        let xs = x.saturating_sub(r)..(x + r + 1).min(w);
        let ys = y.saturating_sub(r)..(y + r + 1).min(h);
        ys.flat_map(move |yy| xs.clone().map(move |xx| yy * w + xx))
    };
    let mut a = vec![0.0; w * h];
    let mut b = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let idx: Vec<usize> = window(x, y).collect();
            let m = idx.len() as f64;
            let mg = idx.iter().map(|&i| g.data[i]).sum::<f64>() / m;
            let mj = idx.iter().map(|&i| j.data[i]).sum::<f64>() / m;
            let var = idx.iter().map(|&i| (g.data[i] - mg).powi(2)).sum::<f64>() / m;
            let cov = idx
                .iter()
                .map(|&i| (g.data[i] - mg) * (j.data[i] - mj))
                .sum::<f64>()
                / m;
            a[y * w + x] = cov / (var + eps);
            b[y * w + x] = mj - a[y * w + x] * mg;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let idx: Vec<usize> = window(x, y).collect();
            let m = idx.len() as f64;
            let ma = idx.iter().map(|&i| a[i]).sum::<f64>() / m;
            let mb = idx.iter().map(|&i| b[i]).sum::<f64>() / m;
            out[y * w + x] = ma * g.data[y * w + x] + mb;
        }
    }
    out
}

fn guided_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    for radius in [1, 4, 8] {
        for epsilon in [1e-4, 1e-2] {
            let g = Plane::<f64>::from_fn(64, 64, |_, _| rng.random());
            let j = Plane::<f64>::from_fn(64, 64, |_, _| rng.random());
            let fast = guided_filter(&g, &j, &GuidedFilterParams { radius, epsilon }).unwrap();
            worst = worst.max(max_abs_diff(
                &fast.data,
                &guided_brute(&g, &j, radius, epsilon),
            ));
        }
    }
    outcome(
        worst < 1e-6,
        format!("64x64, r in {{1,4,8}}, eps in {{1e-4,1e-2}}: max abs err {worst:.2e} (< 1e-6)"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn feature_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (w, h, n_h, n_v) = (20, 16, 5, 3);
    let data = (0..w * h * n_h * n_v)
        .map(|_| rng.random::<f32>())
        .collect();
    let lf = LightField::new(w, h, n_h, n_v, data).unwrap();
    // Γ(Γ(L,3),4): the horizontal mean leaves n_v planes, laid out as a 1 x n_v grid
    let h_first = angular_mean(&lf, AngularAxis::Horizontal);
    let a = angular_mean(
        &LightField::from_stack(1, n_v, h_first).unwrap(),
        AngularAxis::Vertical,
    );
    let v_first = angular_mean(&lf, AngularAxis::Vertical);
    let b = angular_mean(
        &LightField::from_stack(n_h, 1, v_first).unwrap(),
        AngularAxis::Horizontal,
    );
    let commute = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0f32, f32::max) as f64;
    let direct: Vec<f64> = (0..w * h)
        .map(|i| lf.views().map(|v| v[i] as f64).sum::<f64>() / (n_h * n_v) as f64)
        .collect();
    let vs_direct = a
        .data
        .iter()
        .zip(&direct)
        .map(|(p, q)| (*p as f64 - q).abs())
        .fold(0.0, f64::max);

    let mut constant_zero = true;
    for c in [0.0f32, 0.37, 1.0] {
        let flat = LightField::filled(24, 20, 4, 3, c).unwrap();
        let f = ApaFeatures::compute(&flat, &GuidedFilterParams::default()).unwrap();
        constant_zero &= f
            .x_h_norm
            .data
            .iter()
            .chain(&f.x_v_norm.data)
            .all(|&v| v == 0.0);
    }

    let sigma = 20.0;
    let zero = LightField::filled(256, 256, 8, 8, 0.0).unwrap();
    let noise = add_awgn(&zero, &NoiseConfig::new(sigma, 4).unwrap());
    let x_avg = ApaFeatures::compute(&noise, &GuidedFilterParams::default())
        .unwrap()
        .x_avg;
    let m = x_avg.data.iter().map(|&v| v as f64).sum::<f64>() / x_avg.data.len() as f64;
    let std = (x_avg
        .data
        .iter()
        .map(|&v| (v as f64 - m).powi(2))
        .sum::<f64>()
        / x_avg.data.len() as f64)
        .sqrt()
        * 255.0;
    let ratio = std / (sigma / 8.0);
    outcome(
        commute < 1e-6 && vs_direct < 1e-6 && constant_zero && (0.9..=1.1).contains(&ratio),
        format!(
            "commutativity {commute:.1e}, vs direct mean {vs_direct:.1e}; constant LF features exactly 0: {constant_zero}; \
             x_avg noise std {std:.3} vs sigma/8 = {:.3} (ratio {ratio:.3})",
            sigma / 8.0
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn ssim_reference(a: &Image, b: &Image) -> f64 {
    let (win, sd) = (11usize, 1.5f64);
    let mut k2 = vec![0.0f64; win * win];
    for ky in 0..win {
        for kx in 0..win {
            let (dy, dx) = (ky as f64 - 5.0, kx as f64 - 5.0);
            k2[ky * win + kx] = (-(dx * dx + dy * dy) / (2.0 * sd * sd)).exp();
        }
    }
    let total: f64 = k2.iter().sum();
    k2.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0usize;
    for y0 in 0..=a.h - win {
        for x0 in 0..=a.w - win {
            let (mut ma, mut mb) = (0.0, 0.0);
            for ky in 0..win {
                for kx in 0..win {
                    let wgt = k2[ky * win + kx];
                    ma += wgt * a.get(x0 + kx, y0 + ky) as f64;
                    mb += wgt * b.get(x0 + kx, y0 + ky) as f64;
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for ky in 0..win {
                for kx in 0..win {
                    let wgt = k2[ky * win + kx];
                    let da = a.get(x0 + kx, y0 + ky) as f64 - ma;
                    let db = b.get(x0 + kx, y0 + ky) as f64 - mb;
                    va += wgt * da * da;
                    vb += wgt * db * db;
                    cov += wgt * da * db;
                }
            }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// `(tp, fp, fn)` per threshold by direct enumeration of (s, v, x, y).
fn pr_brute(gt: &LightField, test: &LightField, tau: f64, t: f64) -> (u64, u64, u64) {
    let (w, h, n_h, n_v) = gt.dims();
    let (sc, vc) = (n_h.div_ceil(2), n_v.div_ceil(2));
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for v in 1..=n_v {
        for s in 1..=n_h {
            for y in 0..h {
                for x in 0..w {
                    let g = (gt.at(s, v, x, y) as f64 - gt.at(sc, vc, x, y) as f64).abs() > tau;
                    let d = (test.at(s, v, x, y) as f64 - test.at(sc, vc, x, y) as f64).abs() > t;
                    match (g, d) {
                        (true, true) => tp += 1,
                        (false, true) => fp += 1,
                        (true, false) => fn_ += 1,
                        _ => {}
                    }
                }
            }
        }
    }
    (tp, fp, fn_)
}

fn metric_analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let a = Image::from_fn(40, 30, |_, _| rng.random_range(0.0..0.9f32));
    let b = Image {
        w: 40,
        h: 30,
        data: a.data.iter().map(|v| v + 0.1).collect(),
    };
    // the offset is applied in f32, so the exact error is measured per pixel
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(p, q)| ((q - p) as f64).powi(2))
        .sum::<f64>()
        / 1200.0;
    let psnr_err = (psnr(&a, &b, 1.0).unwrap() - 20.0).abs();
    let psnr_exact = (psnr(&a, &b, 1.0).unwrap() - 10.0 * (1.0 / mse).log10()).abs();
    let self_ssim = ssim(&a, &a, &SsimParams::default()).unwrap();

    let mut ssim_err = 0.0f64;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(11..=30), rng.random_range(11..=30));
        let p = Image::from_fn(w, h, |_, _| rng.random::<f32>());
        let q = Image {
            w,
            h,
            data: p
                .data
                .iter()
                .map(|v| (v + rng.random_range(-0.3..0.3f32)).clamp(0.0, 1.0))
                .collect(),
        };
        ssim_err = ssim_err
            .max((ssim(&p, &q, &SsimParams::default()).unwrap() - ssim_reference(&p, &q)).abs());
    }

    let mut pr_exact = true;
    for trial in 0..30 {
        let gt =
            LightField::new(4, 4, 2, 2, (0..64).map(|_| rng.random::<f32>()).collect()).unwrap();
        let jitter: Vec<f32> = (0..64)
            .map(|_| rng.random_range(-0.2..0.2f32) * (trial % 3) as f32)
            .collect();
        let test = LightField::new(
            4,
            4,
            2,
            2,
            gt.data().iter().zip(&jitter).map(|(v, j)| v + j).collect(),
        )
        .unwrap();
        let thresholds = [0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.8];
        let tau = 0.15;
        let Ok(curve) = parallax_pr(&gt, &test, tau, &thresholds) else {
            continue; // no ground-truth edges in this draw
        };
        for (p, &t) in curve.points.iter().zip(&thresholds) {
            pr_exact &= (p.tp, p.fp, p.fn_) == pr_brute(&gt, &test, tau, t);
        }
    }
    outcome(
        psnr_err < 1e-6 && psnr_exact < 1e-9 && self_ssim == 1.0 && ssim_err < 1e-6 && pr_exact,
        format!(
            "psnr 0.1 offset err {psnr_err:.1e}; ssim(a,a) = {self_ssim}; ssim vs reference max err {ssim_err:.1e} \
             on 20 pairs; PR counts exact: {pr_exact}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn noise_synthesis() -> Outcome {
    let sigma = 25.0;
    let clean = LightField::filled(125, 100, 10, 8, 0.5).unwrap();
    let cfg = NoiseConfig::new(sigma, 6).unwrap();
    let noisy = add_awgn(&clean, &cfg);
    let n = noisy.data().len();
    let residuals: Vec<f64> = noisy.data().iter().map(|&v| v as f64 - 0.5).collect();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let std = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let rel = std / (sigma / 255.0) - 1.0;

    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.lft"), dir.path().join("b.lft"));
    save_lft(&add_awgn(&clean, &cfg), &p1).unwrap();
    save_lft(&add_awgn(&clean, &cfg), &p2).unwrap();
    let identical = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
    outcome(
        rel.abs() < 0.01 && identical && n >= 1_000_000,
        format!(
            "{n} samples, std rel err {:+.3}% (< 1%); repeated files identical: {identical}",
            rel * 100.0
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn overfit_sanity() -> Outcome {
    let lf = toy_scene(
        &ToySceneParams {
            w: 32,
            h: 32,
            ..ToySceneParams::default()
        },
        1,
    );
    let mut cfg = TrainConfig::for_sigma(20.0);
    // one 32x32 patch: each epoch is a single Adam step on a batch of one
    cfg.hyper.epochs = 500;
    let (_, syn) = train_syn(std::slice::from_ref(&lf), &cfg, &mut |_| {}).unwrap();
    let (e0, e1) = (syn.initial_loss().unwrap(), syn.final_loss().unwrap());
    let syn_ratio = e1 / e0;

    // oracle synthesis input: channel 2 is the clean view itself
    let clean_avg = ApaFeatures::compute(&lf, &GuidedFilterParams::default())
        .unwrap()
        .x_avg;
    let view0 = lf.view_image(0);
    let input = apa_core::features::build_view_input(&clean_avg, &clean_avg, &view0).unwrap();
    let target = Stack::from_planes(&[Image {
        w: 32,
        h: 32,
        data: view0
            .data
            .iter()
            .zip(&clean_avg.data)
            .map(|(a, b)| a - b)
            .collect(),
    }])
    .unwrap();
    let mut net =
        build_view_net(&ViewNetConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let hyper = TrainHyper {
        epochs: 500,
        ..TrainHyper::default()
    };
    let view = train_network(&mut net, &[input], &[target], &hyper, &mut |_| {}).unwrap();
    let e_view = view.final_loss().unwrap();
    outcome(
        syn_ratio < 0.1 && e_view < 1e-4,
        format!(
            "E_syn {e0:.3e} -> {e1:.3e} after {} steps (ratio {syn_ratio:.3}, < 0.1); E_view {e_view:.2e} after {} steps (< 1e-4)",
            syn.records.len(),
            view.records.len()
        ),
    )
}

// ---------------------------------------------------------- criteria 8 and 9

struct ToyRun {
    syn: SynModel,
    view: ViewModel,
    syn_epoch_means: Vec<f64>,
    train_secs: f64,
}

fn toy_config() -> TrainConfig {
    let mut cfg = TrainConfig::for_sigma(20.0);
    cfg.hyper.alpha = 1e-3;
    cfg.hyper.batch_size = 10;
    cfg.view_patches_per_sai = Some(6);
    cfg
}

fn train_toy() -> ToyRun {
    let t = Instant::now();
    let p = ToySceneParams::default();
    let train: Vec<LightField> = (1000..1004).map(|s| toy_scene(&p, s)).collect();
    let mut cfg = toy_config();
    cfg.hyper.epochs = 40;
    let (syn, summary) = train_syn(&train, &cfg, &mut |_| {}).unwrap();
    cfg.hyper.epochs = 2;
    let (view, _) = train_view(&train, &syn, &cfg, &mut |_| {}).unwrap();
    ToyRun {
        syn,
        view,
        syn_epoch_means: summary.epoch_means,
        train_secs: t.elapsed().as_secs_f64(),
    }
}

struct ToyEval {
    noisy: f64,
    avg_all: f64,
    apa_syn: f64,
    apa: f64,
    dominance: Vec<f64>,
    curves: Vec<(PrCurve, PrCurve)>,
}

fn evaluate_toy(run: &ToyRun) -> ToyEval {
    let p = ToySceneParams::default();
    let mut e = ToyEval {
        noisy: 0.0,
        avg_all: 0.0,
        apa_syn: 0.0,
        apa: 0.0,
        dominance: Vec::new(),
        curves: Vec::new(),
    };
    let scenes = 5;
    for i in 0..scenes {
        let clean = toy_scene(&p, 5000 + i);
        let noisy = add_awgn(&clean, &NoiseConfig::new(20.0, 77 + i).unwrap());
        let r = denoise_lf(&noisy, &run.syn, &run.view).unwrap();
        let avg = baseline_avg_all(&noisy);
        let q = |lf: &LightField| lf_quality(&clean, lf).unwrap().psnr_mean / scenes as f64;
        e.noisy += q(&noisy);
        e.avg_all += q(&avg);
        e.apa_syn += q(&r.lf_syn);
        e.apa += q(&r.lf_denoised);
        let th = default_thresholds();
        let c_apa = parallax_pr(&clean, &r.lf_denoised, DEFAULT_TAU_GT, &th).unwrap();
        let c_avg = parallax_pr(&clean, &avg, DEFAULT_TAU_GT, &th).unwrap();
        e.dominance
            .push(pr_dominance(&c_apa, &c_avg, 20).fraction());
        e.curves.push((c_apa, c_avg));
    }
    e
}

fn toy_denoising(run: &ToyRun, e: &ToyEval) -> Outcome {
    let gain = e.apa - e.noisy;
    outcome(
        gain >= 5.0 && e.apa > e.avg_all && e.apa_syn <= e.apa && run.train_secs < 1800.0,
        format!(
            "mean PSNR noisy {:.2}, Avg-All {:.2}, APA-syn {:.2}, APA {:.2} dB (+{gain:.2} dB); training {:.0} s",
            e.noisy, e.avg_all, e.apa_syn, e.apa, run.train_secs
        ),
    )
}

fn parallax_preservation(e: &ToyEval) -> Outcome {
    let worst = e.dominance.iter().copied().fold(1.0, f64::min);
    let max_recall_apa = e
        .curves
        .iter()
        .map(|c| c.0.max_recall())
        .fold(1.0, f64::min);
    let max_recall_avg = e
        .curves
        .iter()
        .map(|c| c.1.max_recall())
        .fold(0.0, f64::max);
    outcome(
        worst >= 0.9,
        format!(
            "APA wins at >= {:.0}% of 20 recall levels on every scene (min max-recall APA {max_recall_apa:.3}, Avg-All {max_recall_avg:.3})",
            worst * 100.0
        ),
    )
}

fn supplementary(run: &ToyRun) {
    let p = ToySceneParams::default();
    let clean = toy_scene(&p, 6000);
    let kept = denoise_lf(&clean, &run.syn, &run.view).unwrap();
    println!(
        "note: clean input is preserved at {:.2} dB PSNR(output, input)",
        lf_quality(&clean, &kept.lf_denoised).unwrap().psnr_mean
    );

    let gp = ToySceneParams {
        view_gain: 0.3,
        ..p
    };
    let clean = toy_scene(&gp, 6000);
    let noisy = add_awgn(&clean, &NoiseConfig::new(20.0, 5).unwrap());
    let r = denoise_lf(&noisy, &run.syn, &run.view).unwrap();
    let spread = |lf: &LightField| {
        let means: Vec<f64> = lf
            .views()
            .map(|v| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64)
            .collect();
        let mu = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / means.len() as f64).sqrt()
    };
    println!(
        "note: view-dependent gain, spread of per-view means: clean {:.4}, APA-syn {:.4}, APA {:.4}",
        spread(&clean),
        spread(&r.lf_syn),
        spread(&r.lf_denoised)
    );

    let m = &run.syn_epoch_means;
    let rises = m.windows(2).filter(|w| w[1] > w[0]).count();
    println!(
        "note: syn epoch-mean loss {:.3e} -> {:.3e}, rose in {rises} of {} epochs",
        m[0],
        m[m.len() - 1],
        m.len() - 1
    );
}

// --------------------------------------------------------------- criterion 10

struct SmallRun {
    syn: Vec<u8>,
    view: Vec<u8>,
    denoised: Vec<u8>,
}

fn small_run() -> SmallRun {
    let p = ToySceneParams {
        w: 40,
        h: 40,
        n_h: 4,
        n_v: 4,
        ..ToySceneParams::default()
    };
    let train: Vec<LightField> = (20..23).map(|s| toy_scene(&p, s)).collect();
    let mut cfg = TrainConfig::for_sigma(20.0);
    cfg.syn_net.hidden = [16, 16, 16];
    cfg.view_net.hidden = [8, 8, 8];
    cfg.hyper.batch_size = 8;
    cfg.hyper.alpha = 1e-3;
    cfg.hyper.seed = 42;
    cfg.hyper.epochs = 2;
    let (syn, _) = train_syn(&train, &cfg, &mut |_| {}).unwrap();
    let (view, _) = train_view(&train, &syn, &cfg, &mut |_| {}).unwrap();
    let noisy = add_awgn(&toy_scene(&p, 99), &NoiseConfig::new(20.0, 1).unwrap());
    let out = denoise_lf(&noisy, &syn, &view).unwrap();
    SmallRun {
        syn: syn.to_checkpoint().encode(),
        view: view.to_checkpoint().encode(),
        denoised: encode_lft(&out.lf_denoised),
    }
}

fn reproducibility() -> Outcome {
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let a = single.install(small_run);
    let b = single.install(small_run);
    let same = a.syn == b.syn && a.view == b.view && a.denoised == b.denoised;
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(small_run);
    let across = a.syn == multi.syn && a.view == multi.view && a.denoised == multi.denoised;
    outcome(
        same,
        format!(
            "two single-thread runs bit-identical: {same}; 4-thread run also identical: {across}"
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, t: Instant, o: Outcome| {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {n} ({name}, {:.1} s): {}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
        failures += usize::from(!o.passed);
    };
    let t = Instant::now();
    report(1, "gradient correctness", t, gradient_correctness());
    let t = Instant::now();
    report(2, "convolution oracle", t, conv_oracle());
    let t = Instant::now();
    report(3, "guided-filter oracle", t, guided_oracle());
    let t = Instant::now();
    report(4, "feature algebra", t, feature_algebra());
    let t = Instant::now();
    report(5, "metric analytics", t, metric_analytics());
    let t = Instant::now();
    report(6, "noise synthesis", t, noise_synthesis());
    let t = Instant::now();
    report(7, "overfit sanity", t, overfit_sanity());
    let t = Instant::now();
    let run = train_toy();
    let eval = evaluate_toy(&run);
    report(8, "toy end-to-end denoising", t, toy_denoising(&run, &eval));
    let t = Instant::now();
    report(9, "parallax preservation", t, parallax_preservation(&eval));
    supplementary(&run);
    let t = Instant::now();
    report(10, "reproducibility", t, reproducibility());
    if failures == 0 {
        println!("all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
