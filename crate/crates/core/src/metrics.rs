//! PSNR, SSIM, per-light-field quality, and parallax precision-recall.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lf::{check_same, Image, LightField};

/// Cap applied to infinite per-view PSNR values when averaging.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const DEFAULT_TAU_GT: f64 = 0.02;

/// `10·log10(max_val² / MSE)`; identical images give `+inf`.
pub fn psnr(a: &Image, b: &Image, max_val: f64) -> Result<f64> {
    check_same(a, b, "psnr")?;
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    /// Normalized 1D Gaussian; the 2D window is its outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let c = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

/// Valid-position separable filtering of an f64 image.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM over every position where the window fits entirely.
pub fn ssim(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    check_same(a, b, "ssim")?;
    if p.window == 0 || a.w < p.window || a.h < p.window {
        return Err(Error::Dimension(format!(
            "image {}x{} is smaller than the {}x{} SSIM window",
            a.w, a.h, p.window, p.window
        )));
    }
    let k = p.kernel();
    let (w, h) = (a.w, a.h);
    let fa: Vec<f64> = a.data.iter().map(|&v| v as f64).collect();
    let fb: Vec<f64> = b.data.iter().map(|&v| v as f64).collect();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| u * v).collect() };
    let (mu_a, _, _) = filter_valid(&fa, w, h, &k);
    let (mu_b, _, _) = filter_valid(&fb, w, h, &k);
    let (e_aa, _, _) = filter_valid(&prod(&fa, &fa), w, h, &k);
    let (e_bb, _, _) = filter_valid(&prod(&fb, &fb), w, h, &k);
    let (e_ab, _, _) = filter_valid(&prod(&fa, &fb), w, h, &k);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    /// `(psnr, ssim)` per view in linear view order.
    pub per_sai: Vec<(f64, f64)>,
    /// Set when some, but not all, views had infinite PSNR and were capped.
    pub psnr_capped: bool,
    pub n_h: usize,
}

impl QualityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("view,s,v,psnr,ssim\n");
        for (n, (p, s)) in self.per_sai.iter().enumerate() {
            let _ = writeln!(
                out,
                "{n},{},{},{},{s:.6}",
                n % self.n_h + 1,
                n / self.n_h + 1,
                fmt_db(*p)
            );
        }
        out
    }
}

pub fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn check_lf_pair(gt: &LightField, test: &LightField) -> Result<()> {
    if !gt.same_dims(test) {
        return Err(Error::Dimension(format!(
            "ground truth {:?} vs test {:?}",
            gt.dims(),
            test.dims()
        )));
    }
    Ok(())
}

/// Per-view PSNR (peak 1) and SSIM, plus their means.
pub fn lf_quality(gt: &LightField, test: &LightField) -> Result<QualityReport> {
    check_lf_pair(gt, test)?;
    let p = SsimParams::default();
    let per_sai: Vec<(f64, f64)> = (0..gt.n_views())
        .into_par_iter()
        .map(|n| {
            let (a, b) = (gt.view_image(n), test.view_image(n));
            Ok((psnr(&a, &b, 1.0)?, ssim(&a, &b, &p)?))
        })
        .collect::<Result<_>>()?;
    let n = per_sai.len() as f64;
    let infinite = per_sai.iter().filter(|(p, _)| p.is_infinite()).count();
    let psnr_mean = if infinite == per_sai.len() {
        f64::INFINITY
    } else {
        per_sai.iter().map(|(p, _)| p.min(PSNR_CAP_DB)).sum::<f64>() / n
    };
    Ok(QualityReport {
        psnr_mean,
        ssim_mean: per_sai.iter().map(|(_, s)| s).sum::<f64>() / n,
        per_sai,
        psnr_capped: infinite > 0 && infinite < gt.n_views(),
        n_h: gt.n_h(),
    })
}

/// 1-based `(s, v)` of the reference view: `(ceil(n_h/2), ceil(n_v/2))`.
pub fn central_view(n_h: usize, n_v: usize) -> (usize, usize) {
    (n_h.div_ceil(2), n_v.div_ceil(2))
}

/// Per view, `|view - central view| > threshold` in raster order.
pub fn parallax_edge_map(lf: &LightField, threshold: f64) -> Result<Vec<Vec<bool>>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "threshold must be >= 0, got {threshold}"
        )));
    }
    let diffs = parallax_diffs(lf);
    Ok(diffs
        .iter()
        .map(|d| d.iter().map(|&v| v > threshold).collect())
        .collect())
}

fn parallax_diffs(lf: &LightField) -> Vec<Vec<f64>> {
    let (s, v) = central_view(lf.n_h(), lf.n_v());
    let c = lf.view((v - 1) * lf.n_h() + (s - 1));
    lf.views()
        .map(|view| {
            view.iter()
                .zip(c)
                .map(|(&a, &b)| (a as f64 - b as f64).abs())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub tau_gt: f64,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# tau_gt={}\nthreshold,precision,recall,tp,fp,fn\n",
            self.tau_gt
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.6e},{:.6},{:.6},{},{},{}",
                p.threshold, p.precision, p.recall, p.tp, p.fp, p.fn_
            );
        }
        out
    }

    /// Highest precision at recall `>= r`; 0 when no point reaches `r`.
    pub fn interpolated_precision(&self, r: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.recall >= r)
            .map(|p| p.precision)
            .fold(0.0, f64::max)
    }

    pub fn max_recall(&self) -> f64 {
        self.points.iter().map(|p| p.recall).fold(0.0, f64::max)
    }
}

/// `count` thresholds log-spaced over `[lo, hi]`, ascending.
pub fn log_thresholds(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| lo * (ratio * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// The 64 log-spaced test thresholds in `[1e-3, 0.2]`.
pub fn default_thresholds() -> Vec<f64> {
    log_thresholds(1e-3, 0.2, 64)
}

/// Ground-truth edges fixed at `tau_gt`, test edges swept over `thresholds`;
/// counts pooled over every view and pixel.
pub fn parallax_pr(
    gt: &LightField,
    test: &LightField,
    tau_gt: f64,
    thresholds: &[f64],
) -> Result<PrCurve> {
    check_lf_pair(gt, test)?;
    if !(tau_gt > 0.0) {
        return Err(Error::InvalidParam(format!(
            "tau_gt must be > 0, got {tau_gt}"
        )));
    }
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParam(
            "thresholds must be >= 0 and strictly ascending".into(),
        ));
    }
    let gt_pos: Vec<bool> = parallax_diffs(gt)
        .concat()
        .into_iter()
        .map(|d| d > tau_gt)
        .collect();
    let positives = gt_pos.iter().filter(|&&p| p).count() as u64;
    if positives == 0 {
        return Err(Error::InvalidParam(
            "tau_gt yields empty ground truth".into(),
        ));
    }
    let test_diff = parallax_diffs(test).concat();
    let points = thresholds
        .par_iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0u64, 0u64);
            for (&d, &g) in test_diff.iter().zip(&gt_pos) {
                if d > t {
                    if g {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            PrPoint {
                threshold: t,
                precision: if tp + fp == 0 {
                    1.0
                } else {
                    tp as f64 / (tp + fp) as f64
                },
                recall: tp as f64 / positives as f64,
                tp,
                fp,
                fn_: positives - tp,
            }
        })
        .collect();
    Ok(PrCurve { tau_gt, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    pub levels: usize,
    /// Levels where the first curve's interpolated precision is strictly higher.
    pub wins: usize,
}

impl Dominance {
    pub fn fraction(&self) -> f64 {
        if self.levels == 0 {
            0.0
        } else {
            self.wins as f64 / self.levels as f64
        }
    }
}

/// Compares interpolated precision at `levels` recall values `R·k/levels`,
/// `k = 1..=levels`, where `R` is the larger maximum recall of the two curves.
pub fn pr_dominance(a: &PrCurve, b: &PrCurve, levels: usize) -> Dominance {
    let r_max = a.max_recall().max(b.max_recall());
    if r_max == 0.0 {
        return Dominance { levels: 0, wins: 0 };
    }
    let wins = (1..=levels)
        .filter(|&k| {
            let r = (r_max * k as f64 / levels as f64).min(r_max);
            a.interpolated_precision(r) > b.interpolated_precision(r)
        })
        .count();
    Dominance { levels, wins }
}
