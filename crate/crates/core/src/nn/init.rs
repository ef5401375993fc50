use rand::Rng;

use crate::nn::conv::ConvLayer;
use crate::real::Real;

/// Uniform Xavier/Glorot samples on `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init<T: Real, R: Rng + ?Sized>(
    fan_in: usize,
    fan_out: usize,
    len: usize,
    rng: &mut R,
) -> Vec<T> {
    let bound = xavier_bound(fan_in, fan_out);
    (0..len)
        .map(|_| T::of(rng.random_range(-bound..=bound)))
        .collect()
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Layer with Xavier weights (`fan_in = in·k²`, `fan_out = out·k²`) and zero bias.
pub fn xavier_layer<T: Real, R: Rng + ?Sized>(
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    relu: bool,
    rng: &mut R,
) -> ConvLayer<T> {
    let kk = kernel * kernel;
    ConvLayer {
        in_ch,
        out_ch,
        kernel,
        relu,
        weights: xavier_init(in_ch * kk, out_ch * kk, out_ch * in_ch * kk, rng),
        bias: vec![T::zero(); out_ch],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_bound_for_three_three() {
        assert_eq!(xavier_bound(3, 3), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v: Vec<f64> = xavier_init(3, 3, 1000, &mut rng);
        assert!(v.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn sample_mean_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = xavier_bound(16 * 121, 64 * 121);
        let v: Vec<f64> = xavier_init(16 * 121, 64 * 121, 100_000, &mut rng);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.01 * b, "{mean} vs {b}");
        assert!(v.iter().all(|x| x.abs() <= b));
    }

    #[test]
    fn seeded_is_deterministic() {
        let a: Vec<f32> = xavier_init(5, 7, 64, &mut ChaCha8Rng::seed_from_u64(9));
        let b: Vec<f32> = xavier_init(5, 7, 64, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
