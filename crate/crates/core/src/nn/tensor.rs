//! N x C x H x W tensor with an optional gradient slot.

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// A dense rank-4 tensor. `grad` is lazily allocated by [`Tensor4::grad_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T = f32> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor4 {
            n,
            c,
            h,
            w,
            data: vec![T::ZERO; n * c * h * w],
            grad: None,
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::shape_mismatch(
                format!("{} values for {n}x{c}x{h}x{w}", n * c * h * w),
                format!("{}", data.len()),
            ));
        }
        Ok(Tensor4 {
            n,
            c,
            h,
            w,
            data,
            grad: None,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.index(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: T) {
        let i = self.index(n, c, h, w);
        self.data[i] = v;
    }

    /// Gradient slot, allocated to zeros on first use.
    pub fn grad_mut(&mut self) -> &mut Vec<T> {
        if self.grad.is_none() {
            self.grad = Some(vec![T::ZERO; self.data.len()]);
        }
        self.grad.as_mut().unwrap()
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite_scalar()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }

    /// Mean of all elements as f64.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.to_f64()).sum::<f64>() / self.data.len() as f64
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
            grad: None,
        }
    }
}
