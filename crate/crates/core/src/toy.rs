//! Procedural light fields for tests and demos.
//!
//! A scene is a slanted textured background plane and a textured rectangle
//! floating at a different disparity. View `(s, v)` samples both layers at
//! positions shifted by `disparity · (s - s_c, v - v_c)`, where `(s_c, v_c)` is
//! the grid centre, so parallax is linear in the angular index. An optional
//! per-view gain adds view-dependent brightness.

use std::f32::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lf::LightField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySceneParams {
    pub w: usize,
    pub h: usize,
    pub n_h: usize,
    pub n_v: usize,
    /// Largest magnitude of per-view pixel shift of either layer.
    pub max_disparity: f32,
    /// Relative brightness change across the angular grid (0 = Lambertian).
    pub view_gain: f32,
}

impl Default for ToySceneParams {
    fn default() -> Self {
        ToySceneParams {
            w: 96,
            h: 96,
            n_h: 8,
            n_v: 8,
            max_disparity: 1.0,
            view_gain: 0.0,
        }
    }
}

struct Texture {
    base: f32,
    waves: Vec<[f32; 4]>,
    discs: Vec<[f32; 4]>,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let waves = (0..4)
            .map(|_| {
                let wavelength = rng.random_range(6.0..28.0f32);
                let angle = rng.random_range(0.0..TAU);
                let k = TAU / wavelength;
                [
                    k * angle.cos(),
                    k * angle.sin(),
                    rng.random_range(0.0..TAU),
                    rng.random_range(0.03..0.08),
                ]
            })
            .collect();
        let discs = (0..6)
            .map(|_| {
                [
                    rng.random_range(-20.0..120.0f32),
                    rng.random_range(-20.0..120.0f32),
                    rng.random_range(3.0..12.0f32),
                    rng.random_range(-0.25..0.25f32),
                ]
            })
            .collect();
        Texture {
            base: rng.random_range(0.3..0.7),
            waves,
            discs,
        }
    }

    fn at(&self, x: f32, y: f32) -> f32 {
        let mut v = self.base;
        for &[kx, ky, phase, amp] in &self.waves {
            v += amp * (kx * x + ky * y + phase).sin();
        }
        for &[cx, cy, r, val] in &self.discs {
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            v += val * (r - d + 0.5).clamp(0.0, 1.0);
        }
        v.clamp(0.05, 0.95)
    }
}

/// Deterministic scene for `seed`, intensities in [0, 1].
pub fn toy_scene(p: &ToySceneParams, seed: u64) -> LightField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = Texture::random(&mut rng);
    let fg = Texture::random(&mut rng);
    let d = p.max_disparity;
    // background disparity varies linearly across the image (slanted plane)
    let bg_d0 = d * rng.random_range(-0.5..0.0f32);
    let bg_gx = d * rng.random_range(-0.3..0.3f32);
    let bg_gy = d * rng.random_range(-0.3..0.3f32);
    let fg_d = d * rng.random_range(0.5..=1.0f32);
    let (w, h) = (p.w as f32, p.h as f32);
    let rw = rng.random_range(0.3..0.5) * w;
    let rh = rng.random_range(0.3..0.5) * h;
    let rx = rng.random_range(0.1 * w..(0.9 * w - rw).max(0.1 * w + 1.0));
    let ry = rng.random_range(0.1 * h..(0.9 * h - rh).max(0.1 * h + 1.0));
    let sc = (p.n_h as f32 + 1.0) / 2.0;
    let vc = (p.n_v as f32 + 1.0) / 2.0;
    LightField::from_fn(p.w, p.h, p.n_h, p.n_v, |s, v, x, y| {
        let du = s as f32 - sc;
        let dv = v as f32 - vc;
        let (x, y) = (x as f32, y as f32);
        let (fx, fy) = (x - fg_d * du, y - fg_d * dv);
        let val = if fx >= rx && fx < rx + rw && fy >= ry && fy < ry + rh {
            fg.at(fx, fy)
        } else {
            let bd = bg_d0 + bg_gx * (x / w - 0.5) + bg_gy * (y / h - 0.5);
            bg.at(x - bd * du, y - bd * dv)
        };
        let gain = 1.0 + p.view_gain * (du / p.n_h as f32 + dv / p.n_v as f32);
        (val * gain).clamp(0.0, 1.0)
    })
    .expect("positive dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let p = ToySceneParams {
            w: 40,
            h: 30,
            n_h: 3,
            n_v: 4,
            ..ToySceneParams::default()
        };
        let a = toy_scene(&p, 9);
        assert_eq!(a, toy_scene(&p, 9));
        assert_ne!(a, toy_scene(&p, 10));
        assert_eq!(a.dims(), (40, 30, 3, 4));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn views_differ_by_parallax() {
        let a = toy_scene(&ToySceneParams::default(), 1);
        assert_ne!(a.view(0), a.view(63));
        let flat = toy_scene(
            &ToySceneParams {
                max_disparity: 0.0,
                ..ToySceneParams::default()
            },
            1,
        );
        assert!((1..64).all(|n| flat.view(n) == flat.view(0)));
    }

    #[test]
    fn gain_changes_view_means() {
        let p = ToySceneParams {
            w: 32,
            h: 32,
            n_h: 4,
            n_v: 4,
            max_disparity: 0.0,
            view_gain: 0.4,
        };
        let lf = toy_scene(&p, 2);
        let mean = |n: usize| lf.view(n).iter().sum::<f32>() / 1024.0;
        assert!(mean(15) > mean(0) * 1.1);
    }
}
