//! 2-D convolution (cross-correlation) with stride, dilation, zero padding,
//! and weight-norm parameterization.

use rand::Rng;

use super::scalar::Scalar;
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Weight-normalized conv2d layer: the effective kernel for output channel
/// `o` is `g[o] * v[o] / |v[o]|`, with `v[o]` flattened over
/// `in_channels * kh * kw`.
#[derive(Debug, Clone)]
pub struct Conv2d<T = f32> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub padding: (usize, usize),
    /// Direction parameters, `[out][in][kh][kw]` row-major.
    pub weight_v: Vec<T>,
    /// Per-output-channel scale.
    pub weight_g: Vec<T>,
    pub bias: Vec<T>,
    pub grad_v: Vec<T>,
    pub grad_g: Vec<T>,
    pub grad_bias: Vec<T>,
}

/// Saved forward context: the input is enough, columns are recomputed.
#[derive(Debug)]
pub struct Conv2dCtx<T = f32> {
    pub input: Tensor4<T>,
}

impl<T: Scalar> Conv2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        dilation: (usize, usize),
        padding: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel.0 * kernel.1;
        let bound = (1.0 / fan_in as f64).sqrt() * 3f64.sqrt();
        let weight_v: Vec<T> = (0..out_channels * fan_in)
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        // g starts at |v| so the effective weight equals v initially.
        let weight_g: Vec<T> = (0..out_channels)
            .map(|o| {
                let norm = weight_v[o * fan_in..(o + 1) * fan_in]
                    .iter()
                    .map(|x| x.to_f64() * x.to_f64())
                    .sum::<f64>()
                    .sqrt();
                T::from_f64(norm)
            })
            .collect();
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            dilation,
            padding,
            grad_v: vec![T::ZERO; weight_v.len()],
            grad_g: vec![T::ZERO; out_channels],
            grad_bias: vec![T::ZERO; out_channels],
            weight_v,
            weight_g,
            bias: vec![T::ZERO; out_channels],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn param_count(&self) -> usize {
        self.weight_v.len() + self.weight_g.len() + self.bias.len()
    }

    /// Output spatial size for an input of `h x w`.
    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let eff_kh = self.dilation.0 * (self.kernel.0 - 1) + 1;
        let eff_kw = self.dilation.1 * (self.kernel.1 - 1) + 1;
        let h_pad = h + 2 * self.padding.0;
        let w_pad = w + 2 * self.padding.1;
        if h_pad < eff_kh || w_pad < eff_kw {
            return Err(Error::shape_mismatch(
                format!("input of at least {eff_kh}x{eff_kw} after padding"),
                format!("{h_pad}x{w_pad}"),
            ));
        }
        Ok((
            (h_pad - eff_kh) / self.stride.0 + 1,
            (w_pad - eff_kw) / self.stride.1 + 1,
        ))
    }

    /// Effective (normalized) weights plus per-channel direction norms.
    fn effective_weight(&self) -> (Vec<T>, Vec<f64>) {
        let fan = self.fan_in();
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

    fn im2col(&self, x: &Tensor4<T>, item: usize, oh: usize, ow: usize, cols: &mut [T]) {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (dh, dw) = self.dilation;
        let (ph, pw) = self.padding;
        let patch = oh * ow;
        for ci in 0..self.in_channels {
            for kih in 0..kh {
                for kiw in 0..kw {
                    let row = ((ci * kh) + kih) * kw + kiw;
                    let out_row = &mut cols[row * patch..(row + 1) * patch];
                    for oy in 0..oh {
                        let iy = (oy * sh + kih * dh) as isize - ph as isize;
                        let base = oy * ow;
                        if iy < 0 || iy >= x.h as isize {
                            for v in &mut out_row[base..base + ow] {
                                *v = T::ZERO;
                            }
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * sw + kiw * dw) as isize - pw as isize;
                            out_row[base + ox] = if ix < 0 || ix >= x.w as isize {
                                T::ZERO
                            } else {
                                x.get(item, ci, iy as usize, ix as usize)
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, dcols: &[T], item: usize, oh: usize, ow: usize, dx: &mut Tensor4<T>) {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (dh, dw) = self.dilation;
        let (ph, pw) = self.padding;
        let patch = oh * ow;
        for ci in 0..self.in_channels {
            for kih in 0..kh {
                for kiw in 0..kw {
                    let row = ((ci * kh) + kih) * kw + kiw;
                    let src = &dcols[row * patch..(row + 1) * patch];
                    for oy in 0..oh {
                        let iy = (oy * sh + kih * dh) as isize - ph as isize;
                        if iy < 0 || iy >= dx.h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * sw + kiw * dw) as isize - pw as isize;
                            if ix < 0 || ix >= dx.w as isize {
                                continue;
                            }
                            let idx = dx.index(item, ci, iy as usize, ix as usize);
                            dx.data[idx] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }

    /// Cross-correlation forward pass.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, Conv2dCtx<T>)> {
        if x.c != self.in_channels {
            return Err(Error::shape_mismatch(
                format!("{} input channels", self.in_channels),
                format!("{} (input {}x{}x{}x{})", x.c, x.n, x.c, x.h, x.w),
            ));
        }
        let (oh, ow) = self.out_dims(x.h, x.w)?;
        let fan = self.fan_in();
        let patch = oh * ow;
        let (weight, _) = self.effective_weight();
        let mut y = Tensor4::zeros(x.n, self.out_channels, oh, ow);
        let mut cols = vec![T::ZERO; fan * patch];
        for item in 0..x.n {
            self.im2col(x, item, oh, ow, &mut cols);
            let out = &mut y.data[item * self.out_channels * patch..(item + 1) * self.out_channels * patch];
            T::gemm(
                self.out_channels,
                fan,
                patch,
                T::ONE,
                &weight,
                fan as isize,
                1,
                &cols,
                patch as isize,
                1,
                T::ZERO,
                out,
                patch as isize,
                1,
            );
            for o in 0..self.out_channels {
                let b = self.bias[o];
                for v in &mut out[o * patch..(o + 1) * patch] {
                    *v += b;
                }
            }
        }
        y.check_finite("conv2d_forward")?;
        Ok((
            y,
            Conv2dCtx { input: x.clone() },
        ))
    }

    /// Backward pass: accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, ctx: &Conv2dCtx<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let x = &ctx.input;
        let (oh, ow) = self.out_dims(x.h, x.w)?;
        if dy.shape() != (x.n, self.out_channels, oh, ow) {
            return Err(Error::shape_mismatch(
                format!("{}x{}x{}x{}", x.n, self.out_channels, oh, ow),
                format!("{}x{}x{}x{}", dy.n, dy.c, dy.h, dy.w),
            ));
        }
        let fan = self.fan_in();
        let patch = oh * ow;
        let (weight, norms) = self.effective_weight();

        let mut dw_eff = vec![T::ZERO; self.weight_v.len()];
        let mut dx = Tensor4::zeros(x.n, x.c, x.h, x.w);
        let mut cols = vec![T::ZERO; fan * patch];
        let mut dcols = vec![T::ZERO; fan * patch];
        for item in 0..x.n {
            let dy_item = &dy.data[item * self.out_channels * patch..(item + 1) * self.out_channels * patch];
            // dW_eff += dY * cols^T
            self.im2col(x, item, oh, ow, &mut cols);
            T::gemm(
                self.out_channels,
                patch,
                fan,
                T::ONE,
                dy_item,
                patch as isize,
                1,
                &cols,
                1,
                patch as isize,
                T::ONE,
                &mut dw_eff,
                fan as isize,
                1,
            );
            // dcols = W^T * dY, scattered back to dx
            T::gemm(
                fan,
                self.out_channels,
                patch,
                T::ONE,
                &weight,
                1,
                fan as isize,
                dy_item,
                patch as isize,
                1,
                T::ZERO,
                &mut dcols,
                patch as isize,
                1,
            );
            self.col2im(&dcols, item, oh, ow, &mut dx);
            for o in 0..self.out_channels {
                let s: T = dy_item[o * patch..(o + 1) * patch].iter().copied().sum();
                self.grad_bias[o] += s;
            }
        }

        // Chain through the weight-norm reparameterization.
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
                let dv = g_over_norm * (dw[r].to_f64() - v_hat * dot);
                self.grad_v[o * fan + r] += T::from_f64(dv);
            }
        }
        dx.check_finite("conv2d_backward")?;
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.grad_v.iter_mut().for_each(|g| *g = T::ZERO);
        self.grad_g.iter_mut().for_each(|g| *g = T::ZERO);
        self.grad_bias.iter_mut().for_each(|g| *g = T::ZERO);
    }

    /// Visits `(name, dims, data, grad)` for every parameter tensor.
    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T]),
    ) {
        let fan = self.fan_in();
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

    pub fn cast<U: Scalar>(&self) -> Conv2d<U> {
        let conv = |v: &[T]| -> Vec<U> { v.iter().map(|x| U::from_f64(x.to_f64())).collect() };
        Conv2d {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernel: self.kernel,
            stride: self.stride,
            dilation: self.dilation,
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

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(123)
    }

    /// Sets the effective weight directly by writing v and g = |v| scaling.
    fn set_weights(conv: &mut Conv2d<f64>, w: &[f64]) {
        conv.weight_v.copy_from_slice(w);
        let fan = conv.fan_in();
        for o in 0..conv.out_channels {
            let norm = conv.weight_v[o * fan..(o + 1) * fan]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            conv.weight_g[o] = norm;
        }
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut conv = Conv2d::<f64>::new(1, 1, (1, 1), (1, 1), (1, 1), (0, 0), &mut rng());
        set_weights(&mut conv, &[1.0]);
        let x = Tensor4::from_vec(1, 1, 3, 4, (0..12).map(|i| i as f64).collect()).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), (1, 1, 3, 4));
        for (a, b) in x.data.iter().zip(y.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ones_kernel_sums_interior_neighborhood() {
        let mut conv = Conv2d::<f64>::new(1, 1, (3, 3), (1, 1), (1, 1), (1, 1), &mut rng());
        set_weights(&mut conv, &[1.0; 9]);
        let c = 2.5;
        let x = Tensor4::from_vec(1, 1, 5, 5, vec![c; 25]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        // Interior outputs see all nine taps.
        for iy in 1..4 {
            for ix in 1..4 {
                assert!((y.get(0, 0, iy, ix) - 9.0 * c).abs() < 1e-12);
            }
        }
        // Corners see only four.
        assert!((y.get(0, 0, 0, 0) - 4.0 * c).abs() < 1e-12);
    }

    /// Plain quadruple-loop convolution oracle.
    #[allow(clippy::too_many_arguments)]
    fn naive_conv(
        x: &Tensor4<f64>,
        w: &[f64],
        bias: &[f64],
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        dilation: (usize, usize),
        padding: (usize, usize),
    ) -> Tensor4<f64> {
        let (kh, kw) = kernel;
        let eff_kh = dilation.0 * (kh - 1) + 1;
        let eff_kw = dilation.1 * (kw - 1) + 1;
        let oh = (x.h + 2 * padding.0 - eff_kh) / stride.0 + 1;
        let ow = (x.w + 2 * padding.1 - eff_kw) / stride.1 + 1;
        let mut y = Tensor4::zeros(x.n, out_ch, oh, ow);
        for n in 0..x.n {
            for o in 0..out_ch {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias[o];
                        for ci in 0..x.c {
                            for kih in 0..kh {
                                for kiw in 0..kw {
                                    let iy = (oy * stride.0 + kih * dilation.0) as isize
                                        - padding.0 as isize;
                                    let ix = (ox * stride.1 + kiw * dilation.1) as isize
                                        - padding.1 as isize;
                                    if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize
                                    {
                                        continue;
                                    }
                                    let wv = w[((o * x.c + ci) * kh + kih) * kw + kiw];
                                    acc += wv * x.get(n, ci, iy as usize, ix as usize);
                                }
                            }
                        }
                        y.set(n, o, oy, ox, acc);
                    }
                }
            }
        }
        y
    }

    #[test]
    fn matches_naive_loop_oracle() {
        use rand::Rng;
        let mut r = rng();
        for (stride, dilation, padding) in
            [((1, 1), (1, 1), (1, 2)), ((2, 1), (1, 2), (1, 3)), ((2, 2), (1, 4), (0, 7))]
        {
            let mut conv = Conv2d::<f64>::new(3, 4, (3, 5), stride, dilation, padding, &mut r);
            for b in conv.bias.iter_mut() {
                *b = r.gen_range(-0.5..0.5);
            }
            let x = Tensor4::from_vec(
                2,
                3,
                9,
                16,
                (0..2 * 3 * 9 * 16).map(|_| r.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (y, _) = conv.forward(&x).unwrap();
            let (weight, _) = conv.effective_weight();
            let oracle = naive_conv(&x, &weight, &conv.bias, 4, (3, 5), stride, dilation, padding);
            assert_eq!(y.shape(), oracle.shape());
            for (a, b) in y.data.iter().zip(oracle.data.iter()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut conv = Conv2d::<f64>::new(2, 3, (3, 3), (1, 1), (1, 1), (1, 1), &mut rng());
        let x = Tensor4::from_vec(1, 2, 4, 4, vec![0.3; 32]).unwrap();
        let (y, ctx) = conv.forward(&x).unwrap();
        let dy = Tensor4::zeros(y.n, y.c, y.h, y.w);
        let dx = conv.backward(&ctx, &dy).unwrap();
        assert!(dx.data.iter().all(|&v| v == 0.0));
        assert!(conv.grad_v.iter().all(|&v| v == 0.0));
        assert!(conv.grad_g.iter().all(|&v| v == 0.0));
        assert!(conv.grad_bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_loss_weight_gradient_is_input_correlation() {
        // With dL/dy = 1 everywhere and no padding, the gradient of the
        // effective weight at tap (kih,kiw) is the sum of the input values it
        // touches. Use a 1x1 kernel so weight norm reduces to g * sign(v).
        let mut conv = Conv2d::<f64>::new(1, 1, (1, 1), (1, 1), (1, 1), (0, 0), &mut rng());
        set_weights(&mut conv, &[2.0]);
        let x = Tensor4::from_vec(1, 1, 3, 3, (1..=9).map(|v| v as f64).collect()).unwrap();
        let (y, ctx) = conv.forward(&x).unwrap();
        let dy = Tensor4::from_vec(1, 1, 3, 3, vec![1.0; 9]).unwrap();
        conv.backward(&ctx, &dy).unwrap();
        let total: f64 = x.data.iter().sum();
        // v = 2, g = 2: dL/dg = dW_eff . v_hat = total, dL/dv = 0 since the
        // direction cannot change a 1-d unit vector.
        assert!((conv.grad_g[0] - total).abs() < 1e-9);
        assert!(conv.grad_v[0].abs() < 1e-9);
        assert!((conv.grad_bias[0] - 9.0).abs() < 1e-12);
        let _ = y;
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let conv = Conv2d::<f32>::new(3, 4, (3, 3), (1, 1), (1, 1), (1, 1), &mut rng());
        let x = Tensor4::<f32>::zeros(1, 2, 5, 5);
        let err = conv.forward(&x).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("3") && msg.contains("2"), "{msg}");
    }
}
