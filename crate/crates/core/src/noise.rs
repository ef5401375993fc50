//! Seeded additive white Gaussian noise.
//!
//! Each SAI draws from its own ChaCha stream (stream id = linear view index)
//! and consumes samples in raster order, so the noise at `(v, s, y, x)` does
//! not depend on how views are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lf::LightField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Standard deviation on the [0,255] scale.
    pub sigma_255: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(sigma_255: f64, seed: u64) -> Result<Self> {
        if !(sigma_255 >= 0.0) || !sigma_255.is_finite() {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be a finite value >= 0, got {sigma_255}"
            )));
        }
        Ok(NoiseConfig { sigma_255, seed })
    }

    pub fn sigma_unit(&self) -> f64 {
        self.sigma_255 / 255.0
    }
}

/// Returns `lf + N(0, (σ/255)²)` elementwise, without clipping.
pub fn add_awgn(lf: &LightField, cfg: &NoiseConfig) -> LightField {
    if cfg.sigma_255 == 0.0 {
        return lf.clone();
    }
    let sigma = cfg.sigma_unit();
    let view_len = lf.w() * lf.h();
    let mut data = lf.data().to_vec();
    data.par_chunks_mut(view_len)
        .enumerate()
        .for_each(|(n, view)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(n as u64);
            for p in view.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p = (*p as f64 + sigma * z) as f32;
            }
        });
    LightField::new(lf.w(), lf.h(), lf.n_h(), lf.n_v(), data).expect("shape preserved")
}
