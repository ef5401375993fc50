use crate::error::{Error, Result};
use crate::nn::network::{Gradients, Network};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Optional cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            alpha: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            batch_size: 50,
            epochs: 1,
            max_steps: None,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be in [0,1), got {b}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParam("batch_size must be >= 1".into()));
        }
        if !(self.eps_adam >= 0.0) {
            return Err(Error::InvalidParam("eps_adam must be >= 0".into()));
        }
        Ok(())
    }
}

/// First/second moment buffers for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Moments<T> {
    pub fn zeros(len: usize) -> Self {
        Moments {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub t: u64,
    /// One entry per layer: `(weights, bias)`.
    pub moments: Vec<(Moments<T>, Moments<T>)>,
}

impl<T: Real> AdamState<T> {
    pub fn new(net: &Network<T>) -> Self {
        AdamState {
            t: 0,
            moments: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Moments::zeros(l.weights.len()),
                        Moments::zeros(l.bias.len()),
                    )
                })
                .collect(),
        }
    }
}

/// Bias-corrected Adam update of one parameter vector at step `t` (t ≥ 1).
pub fn adam_update<T: Real>(
    params: &mut [T],
    grads: &[T],
    mom: &mut Moments<T>,
    t: u64,
    hyper: &TrainHyper,
) {
    let b1 = hyper.beta1;
    let b2 = hyper.beta2;
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let (b1t, b2t) = (T::of(b1), T::of(b2));
    let (ob1, ob2) = (T::of(1.0 - b1), T::of(1.0 - b2));
    let alpha = T::of(hyper.alpha);
    let eps = T::of(hyper.eps_adam);
    let (inv_c1, inv_c2) = (T::of(1.0 / c1), T::of(1.0 / c2));
    for i in 0..params.len() {
        let g = grads[i];
        let m = b1t * mom.m[i] + ob1 * g;
        let v = b2t * mom.v[i] + ob2 * g * g;
        mom.m[i] = m;
        mom.v[i] = v;
        let m_hat = m * inv_c1;
        let v_hat = v * inv_c2;
        params[i] -= alpha * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Increments the step counter, then updates every layer.
pub fn adam_step<T: Real>(
    net: &mut Network<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    hyper: &TrainHyper,
) {
    state.t += 1;
    let t = state.t;
    for ((layer, g), (mw, mb)) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.moments.iter_mut())
    {
        adam_update(&mut layer.weights, &g.dw, mw, t, hyper);
        adam_update(&mut layer.bias, &g.db, mb, t, hyper);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(alpha: f64) -> TrainHyper {
        TrainHyper {
            alpha,
            ..TrainHyper::default()
        }
    }

    #[test]
    fn first_step_moves_by_alpha() {
        let h = hyper(1e-3);
        for g in [3.7f64, -0.02, 1e-3] {
            let mut p = [1.0f64];
            let mut m = Moments::zeros(1);
            adam_update(&mut p, &[g], &mut m, 1, &h);
            let step = (1.0 - p[0]).abs();
            assert!((step - 1e-3).abs() < 1e-3 * 1e-4, "g={g} step={step}");
            assert_eq!((1.0 - p[0]).signum(), g.signum());
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let h = hyper(0.1);
        let mut p = [0.25f64, -3.0];
        let mut m = Moments::zeros(2);
        for t in 1..=50 {
            adam_update(&mut p, &[0.0, 0.0], &mut m, t, &h);
        }
        assert_eq!(p, [0.25, -3.0]);
    }

    #[test]
    fn minimizes_square() {
        let h = hyper(0.1);
        let mut p = [1.0f64];
        let mut m = Moments::zeros(1);
        let mut reached = None;
        for t in 1..=200u64 {
            let g = 2.0 * p[0];
            adam_update(&mut p, &[g], &mut m, t, &h);
            if p[0].abs() < 0.01 && reached.is_none() {
                reached = Some(t);
            }
        }
        assert!(reached.is_some(), "final {}", p[0]);
    }

    #[test]
    fn first_step_invariant_to_gradient_scale() {
        let h = TrainHyper {
            alpha: 1e-2,
            eps_adam: 0.0,
            ..TrainHyper::default()
        };
        let g = [0.3f64, -1.2, 4e-3];
        let mut a = [0.0f64; 3];
        let mut b = [0.0f64; 3];
        adam_update(&mut a, &g, &mut Moments::zeros(3), 1, &h);
        let scaled: Vec<f64> = g.iter().map(|v| v * 250.0).collect();
        adam_update(&mut b, &scaled, &mut Moments::zeros(3), 1, &h);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_hyper() {
        assert!(hyper(0.0).validate().is_err());
        assert!(TrainHyper {
            beta2: 1.0,
            ..TrainHyper::default()
        }
        .validate()
        .is_err());
        assert!(TrainHyper {
            batch_size: 0,
            ..TrainHyper::default()
        }
        .validate()
        .is_err());
        assert!(TrainHyper::default().validate().is_ok());
    }
}
