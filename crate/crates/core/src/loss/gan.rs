//! Least-squares adversarial loss and feature matching.

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor4};

/// Discriminator-side least-squares loss:
/// `mean((real - 1)^2) + mean(fake^2)`.
pub fn adv_loss_d<T: Scalar>(real: &Tensor4<T>, fake: &Tensor4<T>) -> f64 {
    let real_term = real
        .data
        .iter()
        .map(|v| {
            let d = v.to_f64() - 1.0;
            d * d
        })
        .sum::<f64>()
        / real.numel() as f64;
    let fake_term = fake.data.iter().map(|v| v.to_f64() * v.to_f64()).sum::<f64>()
        / fake.numel() as f64;
    real_term + fake_term
}

/// Gradients of [`adv_loss_d`] with respect to the real and fake score maps.
pub fn adv_loss_d_grads<T: Scalar>(
    real: &Tensor4<T>,
    fake: &Tensor4<T>,
) -> (Tensor4<T>, Tensor4<T>) {
    let mut dreal = real.clone();
    let n = real.numel() as f64;
    for v in &mut dreal.data {
        *v = T::from_f64(2.0 * (v.to_f64() - 1.0) / n);
    }
    let mut dfake = fake.clone();
    let m = fake.numel() as f64;
    for v in &mut dfake.data {
        *v = T::from_f64(2.0 * v.to_f64() / m);
    }
    (dreal, dfake)
}

/// Generator-side least-squares loss: `mean((fake - 1)^2)`.
pub fn adv_loss_g<T: Scalar>(fake: &Tensor4<T>) -> f64 {
    fake.data
        .iter()
        .map(|v| {
            let d = v.to_f64() - 1.0;
            d * d
        })
        .sum::<f64>()
        / fake.numel() as f64
}

/// Gradient of [`adv_loss_g`] with respect to the fake score map.
pub fn adv_loss_g_grad<T: Scalar>(fake: &Tensor4<T>) -> Tensor4<T> {
    let mut d = fake.clone();
    let n = fake.numel() as f64;
    for v in &mut d.data {
        *v = T::from_f64(2.0 * (v.to_f64() - 1.0) / n);
    }
    d
}

/// Feature matching: mean over layers of the mean absolute difference
/// between real and fake feature maps.
pub fn feature_matching_loss<T: Scalar>(
    real: &[Tensor4<T>],
    fake: &[Tensor4<T>],
) -> Result<f64> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::shape_mismatch(
            format!("{} non-empty feature maps", real.len()),
            format!("{}", fake.len()),
        ));
    }
    let mut total = 0.0;
    for (r, f) in real.iter().zip(fake.iter()) {
        if r.shape() != f.shape() {
            return Err(Error::shape_mismatch(
                format!("{:?}", r.shape()),
                format!("{:?}", f.shape()),
            ));
        }
        let mae = r
            .data
            .iter()
            .zip(f.data.iter())
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .sum::<f64>()
            / r.numel() as f64;
        total += mae;
    }
    Ok(total / real.len() as f64)
}

/// Gradients of [`feature_matching_loss`] with respect to the fake features.
pub fn feature_matching_grads<T: Scalar>(
    real: &[Tensor4<T>],
    fake: &[Tensor4<T>],
) -> Vec<Tensor4<T>> {
    let layers = real.len() as f64;
    real.iter()
        .zip(fake.iter())
        .map(|(r, f)| {
            let mut g = f.clone();
            let scale = 1.0 / (layers * r.numel() as f64);
            for (gv, (rv, fv)) in g.data.iter_mut().zip(r.data.iter().zip(f.data.iter())) {
                let d = fv.to_f64() - rv.to_f64();
                *gv = T::from_f64(if d > 0.0 { scale } else if d < 0.0 { -scale } else { 0.0 });
            }
            g
        })
        .collect()
}
