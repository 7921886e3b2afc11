//! 1-D transposed convolution on `(N, C, 1, L)` tensors, weight-normalized.
//! Used by the toy generator to upsample mel frames to waveform rate.

use rand::Rng;

use super::scalar::Scalar;
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Transposed conv1d: output length is `(L - 1) * stride + kernel - 2 * padding`.
/// With `kernel = 2 * stride` and `padding = stride / 2` the layer upsamples
/// by exactly `stride`.
#[derive(Debug, Clone)]
pub struct ConvTranspose1d<T = f32> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out][in][kernel]` row-major direction parameters.
    pub weight_v: Vec<T>,
    pub weight_g: Vec<T>,
    pub bias: Vec<T>,
    pub grad_v: Vec<T>,
    pub grad_g: Vec<T>,
    pub grad_bias: Vec<T>,
}

#[derive(Debug)]
pub struct ConvTranspose1dCtx<T = f32> {
    pub input: Tensor4<T>,
}

impl<T: Scalar> ConvTranspose1d<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan = in_channels * kernel;
        let bound = (1.0 / fan as f64).sqrt() * 3f64.sqrt();
        let weight_v: Vec<T> = (0..out_channels * fan)
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        let weight_g: Vec<T> = (0..out_channels)
            .map(|o| {
                let norm = weight_v[o * fan..(o + 1) * fan]
                    .iter()
                    .map(|x| x.to_f64() * x.to_f64())
                    .sum::<f64>()
                    .sqrt();
                T::from_f64(norm)
            })
            .collect();
        ConvTranspose1d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            grad_v: vec![T::ZERO; weight_v.len()],
            grad_g: vec![T::ZERO; out_channels],
            grad_bias: vec![T::ZERO; out_channels],
            weight_v,
            weight_g,
            bias: vec![T::ZERO; out_channels],
        }
    }

    fn fan(&self) -> usize {
        self.in_channels * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_v.len() + self.weight_g.len() + self.bias.len()
    }

    pub fn out_len(&self, l: usize) -> Result<usize> {
        let raw = (l - 1) * self.stride + self.kernel;
        if raw < 2 * self.padding {
            return Err(Error::shape_mismatch(
                "positive transposed-conv output",
                format!("len {l} with kernel {} padding {}", self.kernel, self.padding),
            ));
        }
        Ok(raw - 2 * self.padding)
    }

    fn effective_weight(&self) -> (Vec<T>, Vec<f64>) {
        let fan = self.fan();
        let mut w = vec![T::ZERO; self.weight_v.len()];
        let mut norms = Vec::with_capacity(self.out_channels);
        for o in 0..self.out_channels {
            let v = &self.weight_v[o * fan..(o + 1) * fan];
            let norm = v.iter().map(|x| x.to_f64() * x.to_f64()).sum::<f64>().sqrt().max(1e-30);
            let scale = T::from_f64(self.weight_g[o].to_f64() / norm);
            for (wi, vi) in w[o * fan..(o + 1) * fan].iter_mut().zip(v.iter()) {
                *wi = *vi * scale;
            }
            norms.push(norm);
        }
        (w, norms)
    }

    pub fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, ConvTranspose1dCtx<T>)> {
        if x.c != self.in_channels || x.h != 1 {
            return Err(Error::shape_mismatch(
                format!("(N, {}, 1, L)", self.in_channels),
                format!("({}, {}, {}, {})", x.n, x.c, x.h, x.w),
            ));
        }
        let l_in = x.w;
        let l_out = self.out_len(l_in)?;
        let (weight, _) = self.effective_weight();
        let mut y = Tensor4::zeros(x.n, self.out_channels, 1, l_out);
        for n in 0..x.n {
            for o in 0..self.out_channels {
                let base = y.index(n, o, 0, 0);
                let b = self.bias[o];
                for v in &mut y.data[base..base + l_out] {
                    *v = b;
                }
            }
            for ci in 0..self.in_channels {
                let x_base = x.index(n, ci, 0, 0);
                for i in 0..l_in {
                    let xv = x.data[x_base + i];
                    let start = (i * self.stride) as isize - self.padding as isize;
                    for o in 0..self.out_channels {
                        let wv = &weight[(o * self.in_channels + ci) * self.kernel
                            ..(o * self.in_channels + ci + 1) * self.kernel];
                        let y_base = y.index(n, o, 0, 0);
                        for (t, &w_t) in wv.iter().enumerate() {
                            let j = start + t as isize;
                            if j >= 0 && (j as usize) < l_out {
                                y.data[y_base + j as usize] += xv * w_t;
                            }
                        }
                    }
                }
            }
        }
        y.check_finite("conv_transpose1d_forward")?;
        Ok((y, ConvTranspose1dCtx { input: x.clone() }))
    }

    pub fn backward(&mut self, ctx: &ConvTranspose1dCtx<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let x = &ctx.input;
        let l_in = x.w;
        let l_out = self.out_len(l_in)?;
        if dy.shape() != (x.n, self.out_channels, 1, l_out) {
            return Err(Error::shape_mismatch(
                format!("({}, {}, 1, {})", x.n, self.out_channels, l_out),
                format!("({}, {}, {}, {})", dy.n, dy.c, dy.h, dy.w),
            ));
        }
        let fan = self.fan();
        let (weight, norms) = self.effective_weight();
        let mut dw_eff = vec![T::ZERO; weight.len()];
        let mut dx = Tensor4::zeros(x.n, x.c, 1, l_in);
        for n in 0..x.n {
            for o in 0..self.out_channels {
                let dy_base = dy.index(n, o, 0, 0);
                let s: T = dy.data[dy_base..dy_base + l_out].iter().copied().sum();
                self.grad_bias[o] += s;
            }
            for ci in 0..self.in_channels {
                let x_base = x.index(n, ci, 0, 0);
                for i in 0..l_in {
                    let xv = x.data[x_base + i];
                    let start = (i * self.stride) as isize - self.padding as isize;
                    let mut dxv = T::ZERO;
                    for o in 0..self.out_channels {
                        let w_row = (o * self.in_channels + ci) * self.kernel;
                        let dy_base = dy.index(n, o, 0, 0);
                        for t in 0..self.kernel {
                            let j = start + t as isize;
                            if j >= 0 && (j as usize) < l_out {
                                let g = dy.data[dy_base + j as usize];
                                dxv += g * weight[w_row + t];
                                dw_eff[w_row + t] += g * xv;
                            }
                        }
                    }
                    let idx = dx.index(n, ci, 0, i);
                    dx.data[idx] += dxv;
                }
            }
        }
        for o in 0..self.out_channels {
            let v = &self.weight_v[o * fan..(o + 1) * fan];
            let dw = &dw_eff[o * fan..(o + 1) * fan];
            let norm = norms[o];
            let dot: f64 = dw
                .iter()
                .zip(v.iter())
                .map(|(a, b)| a.to_f64() * b.to_f64())
                .sum::<f64>()
                / norm;
            self.grad_g[o] += T::from_f64(dot);
            let g_over_norm = self.weight_g[o].to_f64() / norm;
            for r in 0..fan {
                let v_hat = v[r].to_f64() / norm;
                self.grad_v[o * fan + r] += T::from_f64(g_over_norm * (dw[r].to_f64() - v_hat * dot));
            }
        }
        dx.check_finite("conv_transpose1d_backward")?;
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.grad_v.iter_mut().for_each(|g| *g = T::ZERO);
        self.grad_g.iter_mut().for_each(|g| *g = T::ZERO);
        self.grad_bias.iter_mut().for_each(|g| *g = T::ZERO);
    }

    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T]),
    ) {
        let fan = self.fan();
        f(
            &format!("{prefix}.weight_v"),
            &[self.out_channels, fan],
            &mut self.weight_v,
            &mut self.grad_v,
        );
        f(
            &format!("{prefix}.weight_g"),
            &[self.out_channels],
            &mut self.weight_g,
            &mut self.grad_g,
        );
        f(
            &format!("{prefix}.bias"),
            &[self.out_channels],
            &mut self.bias,
            &mut self.grad_bias,
        );
    }

    pub fn cast<U: Scalar>(&self) -> ConvTranspose1d<U> {
        let conv = |v: &[T]| -> Vec<U> { v.iter().map(|x| U::from_f64(x.to_f64())).collect() };
        ConvTranspose1d {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernel: self.kernel,
            stride: self.stride,
            padding: self.padding,
            weight_v: conv(&self.weight_v),
            weight_g: conv(&self.weight_g),
            bias: conv(&self.bias),
            grad_v: vec![U::ZERO; self.weight_v.len()],
            grad_g: vec![U::ZERO; self.weight_g.len()],
            grad_bias: vec![U::ZERO; self.bias.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn upsamples_by_exactly_stride() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = ConvTranspose1d::<f32>::new(3, 2, 8, 4, 2, &mut rng);
        let x = Tensor4::<f32>::zeros(2, 3, 1, 12);
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), (2, 2, 1, 48));
    }

    #[test]
    fn single_tap_identity_with_stride_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = ConvTranspose1d::<f64>::new(1, 1, 1, 1, 0, &mut rng);
        layer.weight_v = vec![1.0];
        layer.weight_g = vec![1.0];
        let x = Tensor4::from_vec(1, 1, 1, 5, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        for (a, b) in x.data.iter().zip(y.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_consistency_with_forward() {
        // <T(x), g> == <x, T^T(g)> for the linear part (bias removed).
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = ConvTranspose1d::<f64>::new(2, 3, 8, 4, 2, &mut rng);
        layer.bias.iter_mut().for_each(|b| *b = 0.0);
        let x = Tensor4::from_vec(1, 2, 1, 7, (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let (y, ctx) = layer.forward(&x).unwrap();
        let mut g = y.clone();
        for v in &mut g.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        let dx = layer.backward(&ctx, &g).unwrap();
        let lhs: f64 = y.data.iter().zip(g.data.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(dx.data.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
