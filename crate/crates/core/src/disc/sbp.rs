//! Sub-band processing: one dedicated convolution per octave, outputs
//! concatenated back along the frequency axis.
//!
//! Keeping each octave in its own convolution confines every kernel
//! application to a single octave, so the inter-octave timing offsets of the
//! raw fast CQT never mix inside a receptive field before concatenation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    concat_freq, concat_freq_backward, leaky_relu, leaky_relu_backward, Conv2d, Conv2dCtx, Scalar,
    Tensor4, LEAKY_SLOPE,
};

/// Output channels of each per-octave convolution.
pub const SBP_CHANNELS: usize = 32;

/// Kernel of the per-octave convolutions: 3 bins by 9 frames.
pub const SBP_KERNEL: (usize, usize) = (3, 9);

/// Per-octave convolutional encoder. Parameters are not shared between
/// octaves.
#[derive(Debug, Clone)]
pub struct SbpModule<T = f32> {
    pub bins_per_octave: usize,
    pub convs: Vec<Conv2d<T>>,
}

#[derive(Debug)]
pub struct SbpCtx<T = f32> {
    /// Per octave: conv context plus pre-activation output.
    stages: Vec<(Conv2dCtx<T>, Tensor4<T>)>,
    heights: Vec<usize>,
}

impl<T: Scalar> SbpModule<T> {
    pub fn new(n_octaves: usize, bins_per_octave: usize, rng: &mut impl Rng) -> Self {
        let convs = (0..n_octaves)
            .map(|_| {
                Conv2d::new(
                    1,
                    SBP_CHANNELS,
                    SBP_KERNEL,
                    (1, 1),
                    (1, 1),
                    (SBP_KERNEL.0 / 2, SBP_KERNEL.1 / 2),
                    rng,
                )
            })
            .collect();
        SbpModule { bins_per_octave, convs }
    }

    pub fn n_octaves(&self) -> usize {
        self.convs.len()
    }

    /// Splits `(N, 1, K, T)` into octave slices along the frequency axis.
    fn octave_slices(&self, x: &Tensor4<T>) -> Result<Vec<Tensor4<T>>> {
        let b = self.bins_per_octave;
        if x.c != 1 || x.h != b * self.convs.len() {
            return Err(Error::shape_mismatch(
                format!("(N, 1, {}, T)", b * self.convs.len()),
                format!("({}, {}, {}, {})", x.n, x.c, x.h, x.w),
            ));
        }
        let mut slices = Vec::with_capacity(self.convs.len());
        for o in 0..self.convs.len() {
            let mut s = Tensor4::zeros(x.n, 1, b, x.w);
            for n in 0..x.n {
                for h in 0..b {
                    let src = x.index(n, 0, o * b + h, 0);
                    let dst = s.index(n, 0, h, 0);
                    s.data[dst..dst + x.w].copy_from_slice(&x.data[src..src + x.w]);
                }
            }
            slices.push(s);
        }
        Ok(slices)
    }

    /// Applies each octave's convolution (plus leaky ReLU) and concatenates
    /// the latents along frequency: `(N, 1, K, T)` -> `(N, C, K, T)`.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, SbpCtx<T>)> {
        let slices = self.octave_slices(x)?;
        let mut latents = Vec::with_capacity(slices.len());
        let mut stages = Vec::with_capacity(slices.len());
        let mut heights = Vec::with_capacity(slices.len());
        for (conv, slice) in self.convs.iter().zip(slices.iter()) {
            let (pre, ctx) = conv.forward(slice)?;
            let post = leaky_relu(&pre, LEAKY_SLOPE)?;
            heights.push(post.h);
            latents.push(post);
            stages.push((ctx, pre));
        }
        let refs: Vec<&Tensor4<T>> = latents.iter().collect();
        let out = concat_freq(&refs)?;
        Ok((out, SbpCtx { stages, heights }))
    }

    /// Backward through concatenation, activation, and the per-octave convs;
    /// returns the gradient of the full-spectrum input.
    pub fn backward(&mut self, ctx: &SbpCtx<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let parts = concat_freq_backward(dy, &ctx.heights);
        let b = self.bins_per_octave;
        let n_oct = self.convs.len();
        let frames = dy.w;
        let mut dx = Tensor4::zeros(dy.n, 1, b * n_oct, frames);
        for (o, ((conv, (conv_ctx, pre)), dpart)) in self
            .convs
            .iter_mut()
            .zip(ctx.stages.iter())
            .zip(parts.iter())
            .enumerate()
        {
            let dpre = leaky_relu_backward(pre, dpart, LEAKY_SLOPE);
            let dslice = conv.backward(conv_ctx, &dpre)?;
            for n in 0..dx.n {
                for h in 0..b {
                    let dst = dx.index(n, 0, o * b + h, 0);
                    let src = dslice.index(n, 0, h, 0);
                    dx.data[dst..dst + frames].copy_from_slice(&dslice.data[src..src + frames]);
                }
            }
        }
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        for c in &mut self.convs {
            c.zero_grads();
        }
    }

    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T]),
    ) {
        for (o, conv) in self.convs.iter_mut().enumerate() {
            conv.visit_params(&format!("{prefix}.oct{o}"), f);
        }
    }

    pub fn param_count(&self) -> usize {
        self.convs.iter().map(|c| c.param_count()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> SbpModule<U> {
        SbpModule {
            bins_per_octave: self.bins_per_octave,
            convs: self.convs.iter().map(|c| c.cast()).collect(),
        }
    }
}
