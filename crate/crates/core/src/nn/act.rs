//! Pointwise activations.

use super::scalar::Scalar;
use super::tensor::Tensor4;
use crate::error::Result;

/// Negative slope used by every leaky ReLU in the discriminators.
pub const LEAKY_SLOPE: f64 = 0.1;

/// `max(x, slope * x)` elementwise.
pub fn leaky_relu<T: Scalar>(x: &Tensor4<T>, slope: f64) -> Result<Tensor4<T>> {
    let s = T::from_f64(slope);
    let mut y = x.clone();
    y.grad = None;
    for v in &mut y.data {
        if *v < T::ZERO {
            *v = *v * s;
        }
    }
    y.check_finite("leaky_relu")?;
    Ok(y)
}

/// Backward of [`leaky_relu`]; `x` is the saved forward input.
pub fn leaky_relu_backward<T: Scalar>(x: &Tensor4<T>, dy: &Tensor4<T>, slope: f64) -> Tensor4<T> {
    debug_assert_eq!(x.shape(), dy.shape());
    let s = T::from_f64(slope);
    let mut dx = dy.clone();
    dx.grad = None;
    for (d, xv) in dx.data.iter_mut().zip(x.data.iter()) {
        if *xv < T::ZERO {
            *d = *d * s;
        }
    }
    dx
}

/// Hyperbolic tangent; returns the output, which the backward pass reuses.
pub fn tanh<T: Scalar>(x: &Tensor4<T>) -> Result<Tensor4<T>> {
    let mut y = x.clone();
    y.grad = None;
    for v in &mut y.data {
        *v = v.tanh_s();
    }
    y.check_finite("tanh")?;
    Ok(y)
}

/// Backward of [`tanh`]; `y` is the saved forward output.
pub fn tanh_backward<T: Scalar>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    debug_assert_eq!(y.shape(), dy.shape());
    let mut dx = dy.clone();
    dx.grad = None;
    for (d, yv) in dx.data.iter_mut().zip(y.data.iter()) {
        *d = *d * (T::ONE - *yv * *yv);
    }
    dx
}
