//! Concatenation along the channel and frequency axes, with splitting
//! backwards.

use super::scalar::Scalar;
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Stacks tensors along the channel axis; all inputs must share `n, h, w`.
pub fn concat_channels<T: Scalar>(xs: &[&Tensor4<T>]) -> Result<Tensor4<T>> {
    concat_axis(xs, Axis::Channel)
}

/// Splits an upstream gradient back into per-input channel gradients.
pub fn concat_channels_backward<T: Scalar>(dy: &Tensor4<T>, channels: &[usize]) -> Vec<Tensor4<T>> {
    split_axis(dy, channels, Axis::Channel)
}

/// Stacks tensors along the frequency (height) axis; inputs share `n, c, w`.
pub fn concat_freq<T: Scalar>(xs: &[&Tensor4<T>]) -> Result<Tensor4<T>> {
    concat_axis(xs, Axis::Height)
}

pub fn concat_freq_backward<T: Scalar>(dy: &Tensor4<T>, heights: &[usize]) -> Vec<Tensor4<T>> {
    split_axis(dy, heights, Axis::Height)
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Channel,
    Height,
}

fn concat_axis<T: Scalar>(xs: &[&Tensor4<T>], axis: Axis) -> Result<Tensor4<T>> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("nothing to concatenate".into()));
    }
    let first = xs[0];
    for x in xs {
        let ok = match axis {
            Axis::Channel => x.n == first.n && x.h == first.h && x.w == first.w,
            Axis::Height => x.n == first.n && x.c == first.c && x.w == first.w,
        };
        if !ok {
            return Err(Error::shape_mismatch(
                format!("{}x_x{}x{}", first.n, first.h, first.w),
                format!("{}x_x{}x{}", x.n, x.h, x.w),
            ));
        }
    }
    let (total_c, total_h) = match axis {
        Axis::Channel => (xs.iter().map(|x| x.c).sum::<usize>(), first.h),
        Axis::Height => (first.c, xs.iter().map(|x| x.h).sum::<usize>()),
    };
    let mut y = Tensor4::zeros(first.n, total_c, total_h, first.w);
    for n in 0..first.n {
        match axis {
            Axis::Channel => {
                let mut c0 = 0;
                for x in xs {
                    for c in 0..x.c {
                        for h in 0..x.h {
                            let src = x.index(n, c, h, 0);
                            let dst = y.index(n, c0 + c, h, 0);
                            y.data[dst..dst + x.w].copy_from_slice(&x.data[src..src + x.w]);
                        }
                    }
                    c0 += x.c;
                }
            }
            Axis::Height => {
                let mut h0 = 0;
                for x in xs {
                    for c in 0..x.c {
                        for h in 0..x.h {
                            let src = x.index(n, c, h, 0);
                            let dst = y.index(n, c, h0 + h, 0);
                            y.data[dst..dst + x.w].copy_from_slice(&x.data[src..src + x.w]);
                        }
                    }
                    h0 += x.h;
                }
            }
        }
    }
    Ok(y)
}

fn split_axis<T: Scalar>(dy: &Tensor4<T>, sizes: &[usize], axis: Axis) -> Vec<Tensor4<T>> {
    let mut outs = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &s in sizes {
        let mut part = match axis {
            Axis::Channel => Tensor4::zeros(dy.n, s, dy.h, dy.w),
            Axis::Height => Tensor4::zeros(dy.n, dy.c, s, dy.w),
        };
        for n in 0..dy.n {
            for c in 0..part.c {
                for h in 0..part.h {
                    let (src_c, src_h) = match axis {
                        Axis::Channel => (offset + c, h),
                        Axis::Height => (c, offset + h),
                    };
                    let src = dy.index(n, src_c, src_h, 0);
                    let dst = part.index(n, c, h, 0);
                    part.data[dst..dst + dy.w].copy_from_slice(&dy.data[src..src + dy.w]);
                }
            }
        }
        outs.push(part);
        offset += s;
    }
    outs
}
