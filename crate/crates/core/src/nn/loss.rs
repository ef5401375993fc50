use crate::error::{Error, Result};
use crate::nn::tensor::Tensor4;
use crate::real::Real;

/// Mean squared error over all elements and its gradient `2(pred - target)/N`.
pub fn mse_loss<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Tensor4<T>)> {
    if pred.dims() != target.dims() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    let n = pred.data.len();
    let (sum, grad) = sq_err_and_grad(&pred.data, &target.data, n);
    Ok((
        sum / n as f64,
        Tensor4::from_vec(pred.n, pred.c, pred.h, pred.w, grad)?,
    ))
}

/// Sum of squared errors of one slice, and `2(pred - target)/denom` per element.
pub(crate) fn sq_err_and_grad<T: Real>(pred: &[T], target: &[T], denom: usize) -> (f64, Vec<T>) {
    let scale = T::of(2.0 / denom as f64);
    let mut sum = 0.0f64;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.f64() * d.f64();
            scale * d
        })
        .collect();
    (sum, grad)
}
