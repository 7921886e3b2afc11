//! One sub-discriminator: a front end (sub-band, shared-conv, or plain
//! channels) followed by the shared convolutional trunk.

use rand::Rng;

use super::sbp::{SbpModule, SBP_CHANNELS, SBP_KERNEL};
use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, concat_channels_backward, leaky_relu, leaky_relu_backward, Conv2d, Conv2dCtx,
    Scalar, Tensor4, LEAKY_SLOPE,
};

/// Trunk width from the reference architecture.
pub const TRUNK_CHANNELS: usize = 32;

/// Time-dilation rates of the three strided trunk convolutions.
pub const TRUNK_DILATIONS: [usize; 3] = [1, 2, 4];

/// Real and imaginary planes of a spectrogram batch, each `(N, 1, K, T)`.
#[derive(Debug, Clone)]
pub struct SpecBatch<T = f32> {
    pub real: Tensor4<T>,
    pub imag: Tensor4<T>,
}

impl<T: Scalar> SpecBatch<T> {
    pub fn cast<U: Scalar>(&self) -> SpecBatch<U> {
        SpecBatch { real: self.real.cast(), imag: self.imag.cast() }
    }
}

/// Score map plus the ordered intermediate feature maps used for feature
/// matching. The final score map is also the last feature entry.
#[derive(Debug, Clone)]
pub struct DiscriminatorOutput<T = f32> {
    pub score: Tensor4<T>,
    pub features: Vec<Tensor4<T>>,
}

/// Upstream gradients for one sub-discriminator: the score gradient plus
/// optional per-feature gradients (index-aligned with `features`).
#[derive(Debug, Clone)]
pub struct DiscGrads<T = f32> {
    pub dscore: Tensor4<T>,
    pub dfeatures: Vec<Option<Tensor4<T>>>,
}

impl<T: Scalar> DiscGrads<T> {
    pub fn score_only(dscore: Tensor4<T>, n_features: usize) -> Self {
        DiscGrads { dscore, dfeatures: vec![None; n_features] }
    }
}

/// Front-end variant ahead of the trunk.
#[derive(Debug, Clone)]
pub enum Front<T = f32> {
    /// Per-octave convolutions on real and imaginary parts separately.
    SubBand { real: SbpModule<T>, imag: SbpModule<T> },
    /// Ablation: one shared convolution over the unsplit spectrogram,
    /// applied to the real and imaginary parts separately.
    Shared { conv: Conv2d<T> },
    /// Real/imag as two input channels, no front parameters (STFT path).
    Channels,
}

impl<T: Scalar> Front<T> {
    fn out_channels(&self) -> usize {
        match self {
            Front::SubBand { .. } | Front::Shared { .. } => 2 * SBP_CHANNELS,
            Front::Channels => 2,
        }
    }
}

#[derive(Debug)]
enum FrontCtx<T> {
    SubBand {
        real: super::sbp::SbpCtx<T>,
        imag: super::sbp::SbpCtx<T>,
        real_pre: usize,
    },
    Shared {
        real: (Conv2dCtx<T>, Tensor4<T>),
        imag: (Conv2dCtx<T>, Tensor4<T>),
        channels: usize,
    },
    Channels,
}

#[derive(Debug)]
pub struct SubDiscCtx<T = f32> {
    front: FrontCtx<T>,
    trunk: Vec<(Conv2dCtx<T>, Tensor4<T>)>,
    post: Conv2dCtx<T>,
}

/// Front end, entry convolution, three dilated/strided convolutions, and the
/// score convolution, with leaky ReLU between layers. All post-activation
/// maps (and the raw score) are recorded as features.
#[derive(Debug, Clone)]
pub struct SubDiscriminator<T = f32> {
    pub front: Front<T>,
    pub conv1: Conv2d<T>,
    pub dilated: Vec<Conv2d<T>>,
    pub post: Conv2d<T>,
}

impl<T: Scalar> SubDiscriminator<T> {
    pub fn new(front: Front<T>, rng: &mut impl Rng) -> Self {
        let in_ch = front.out_channels();
        // Even time kernels get padding kw/2 so a single-frame input still
        // produces a non-empty map.
        let conv1 = Conv2d::new(in_ch, TRUNK_CHANNELS, (3, 8), (1, 1), (1, 1), (1, 4), rng);
        let dilated = TRUNK_DILATIONS
            .iter()
            .map(|&d| {
                let pad_w = if d == 1 { 4 } else { (d * 7) / 2 };
                Conv2d::new(
                    TRUNK_CHANNELS,
                    TRUNK_CHANNELS,
                    (3, 8),
                    (2, 1),
                    (1, d),
                    (1, pad_w),
                    rng,
                )
            })
            .collect();
        let post = Conv2d::new(TRUNK_CHANNELS, 1, (3, 3), (1, 1), (1, 1), (1, 1), rng);
        SubDiscriminator { front, conv1, dilated, post }
    }

    /// Number of feature maps this sub-discriminator reports.
    pub fn n_features(&self) -> usize {
        match self.front {
            Front::Channels => 5,
            _ => 6,
        }
    }

    pub fn forward(&self, spec: &SpecBatch<T>) -> Result<(DiscriminatorOutput<T>, SubDiscCtx<T>)> {
        if spec.real.shape() != spec.imag.shape() {
            return Err(Error::shape_mismatch(
                format!("{:?}", spec.real.shape()),
                format!("{:?}", spec.imag.shape()),
            ));
        }
        let mut features = Vec::with_capacity(self.n_features());
        let (x0, front_ctx) = match &self.front {
            Front::SubBand { real, imag } => {
                let (r, rctx) = real.forward(&spec.real)?;
                let (i, ictx) = imag.forward(&spec.imag)?;
                let x0 = concat_channels(&[&r, &i])?;
                features.push(x0.clone());
                (x0, FrontCtx::SubBand { real: rctx, imag: ictx, real_pre: r.c })
            }
            Front::Shared { conv } => {
                let (r_pre, rctx) = conv.forward(&spec.real)?;
                let r = leaky_relu(&r_pre, LEAKY_SLOPE)?;
                let (i_pre, ictx) = conv.forward(&spec.imag)?;
                let i = leaky_relu(&i_pre, LEAKY_SLOPE)?;
                let x0 = concat_channels(&[&r, &i])?;
                features.push(x0.clone());
                (
                    x0,
                    FrontCtx::Shared {
                        real: (rctx, r_pre),
                        imag: (ictx, i_pre),
                        channels: SBP_CHANNELS,
                    },
                )
            }
            Front::Channels => {
                let x0 = concat_channels(&[&spec.real, &spec.imag])?;
                (x0, FrontCtx::Channels)
            }
        };

        let mut trunk_ctx = Vec::with_capacity(1 + self.dilated.len());
        let mut x = x0;
        for conv in std::iter::once(&self.conv1).chain(self.dilated.iter()) {
            let (pre, ctx) = conv.forward(&x)?;
            x = leaky_relu(&pre, LEAKY_SLOPE)?;
            features.push(x.clone());
            trunk_ctx.push((ctx, pre));
        }
        let (score, post_ctx) = self.post.forward(&x)?;
        features.push(score.clone());
        Ok((
            DiscriminatorOutput { score, features },
            SubDiscCtx { front: front_ctx, trunk: trunk_ctx, post: post_ctx },
        ))
    }

    /// Backward pass; accumulates parameter gradients and returns the
    /// gradients of the real and imaginary input planes.
    pub fn backward(
        &mut self,
        ctx: &SubDiscCtx<T>,
        grads: &DiscGrads<T>,
    ) -> Result<(Tensor4<T>, Tensor4<T>)> {
        let n_feat = self.n_features();
        if grads.dfeatures.len() != n_feat {
            return Err(Error::shape_mismatch(
                format!("{n_feat} feature grads"),
                format!("{}", grads.dfeatures.len()),
            ));
        }
        let add = |a: &mut Tensor4<T>, b: &Tensor4<T>| {
            for (x, y) in a.data.iter_mut().zip(b.data.iter()) {
                *x += *y;
            }
        };
        // Feature index of the first trunk activation.
        let trunk_base = n_feat - 1 - self.dilated.len() - 1;

        let mut dscore = grads.dscore.clone();
        if let Some(df) = &grads.dfeatures[n_feat - 1] {
            add(&mut dscore, df);
        }
        let mut dx = self.post.backward(&ctx.post, &dscore)?;

        for (idx, (conv_ctx, pre)) in ctx.trunk.iter().enumerate().rev() {
            let feat_idx = trunk_base + idx;
            if let Some(df) = &grads.dfeatures[feat_idx] {
                add(&mut dx, df);
            }
            let dpre = leaky_relu_backward(pre, &dx, LEAKY_SLOPE);
            let conv = if idx == 0 { &mut self.conv1 } else { &mut self.dilated[idx - 1] };
            dx = conv.backward(conv_ctx, &dpre)?;
        }

        match (&mut self.front, &ctx.front) {
            (Front::SubBand { real, imag }, FrontCtx::SubBand { real: rctx, imag: ictx, real_pre }) => {
                if let Some(df) = &grads.dfeatures[0] {
                    add(&mut dx, df);
                }
                let mut parts = concat_channels_backward(&dx, &[*real_pre, dx.c - *real_pre]);
                let di = parts.pop().unwrap();
                let dr = parts.pop().unwrap();
                let dreal = real.backward(rctx, &dr)?;
                let dimag = imag.backward(ictx, &di)?;
                Ok((dreal, dimag))
            }
            (Front::Shared { conv }, FrontCtx::Shared { real, imag, channels }) => {
                if let Some(df) = &grads.dfeatures[0] {
                    add(&mut dx, df);
                }
                let mut parts = concat_channels_backward(&dx, &[*channels, dx.c - *channels]);
                let di_post = parts.pop().unwrap();
                let dr_post = parts.pop().unwrap();
                let dr_pre = leaky_relu_backward(&real.1, &dr_post, LEAKY_SLOPE);
                let di_pre = leaky_relu_backward(&imag.1, &di_post, LEAKY_SLOPE);
                let dreal = conv.backward(&real.0, &dr_pre)?;
                let dimag = conv.backward(&imag.0, &di_pre)?;
                Ok((dreal, dimag))
            }
            (Front::Channels, FrontCtx::Channels) => {
                let mut parts = concat_channels_backward(&dx, &[1, 1]);
                let dimag = parts.pop().unwrap();
                let dreal = parts.pop().unwrap();
                Ok((dreal, dimag))
            }
            _ => Err(Error::MissingContext("front context does not match front")),
        }
    }

    pub fn zero_grads(&mut self) {
        match &mut self.front {
            Front::SubBand { real, imag } => {
                real.zero_grads();
                imag.zero_grads();
            }
            Front::Shared { conv } => conv.zero_grads(),
            Front::Channels => {}
        }
        self.conv1.zero_grads();
        for c in &mut self.dilated {
            c.zero_grads();
        }
        self.post.zero_grads();
    }

    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T]),
    ) {
        match &mut self.front {
            Front::SubBand { real, imag } => {
                real.visit_params(&format!("{prefix}.sbp_real"), f);
                imag.visit_params(&format!("{prefix}.sbp_imag"), f);
            }
            Front::Shared { conv } => conv.visit_params(&format!("{prefix}.shared"), f),
            Front::Channels => {}
        }
        self.conv1.visit_params(&format!("{prefix}.conv1"), f);
        for (i, c) in self.dilated.iter_mut().enumerate() {
            c.visit_params(&format!("{prefix}.dilated{i}"), f);
        }
        self.post.visit_params(&format!("{prefix}.post"), f);
    }

    pub fn param_count(&self) -> usize {
        let front = match &self.front {
            Front::SubBand { real, imag } => real.param_count() + imag.param_count(),
            Front::Shared { conv } => conv.param_count(),
            Front::Channels => 0,
        };
        front
            + self.conv1.param_count()
            + self.dilated.iter().map(|c| c.param_count()).sum::<usize>()
            + self.post.param_count()
    }

    pub fn cast<U: Scalar>(&self) -> SubDiscriminator<U> {
        let front = match &self.front {
            Front::SubBand { real, imag } => Front::SubBand { real: real.cast(), imag: imag.cast() },
            Front::Shared { conv } => Front::Shared { conv: conv.cast() },
            Front::Channels => Front::Channels,
        };
        SubDiscriminator {
            front,
            conv1: self.conv1.cast(),
            dilated: self.dilated.iter().map(|c| c.cast()).collect(),
            post: self.post.cast(),
        }
    }
}

/// Builds the shared-conv front used by the ablation discriminator.
pub fn shared_front<T: Scalar>(rng: &mut impl Rng) -> Front<T> {
    Front::Shared {
        conv: Conv2d::new(
            1,
            SBP_CHANNELS,
            SBP_KERNEL,
            (1, 1),
            (1, 1),
            (SBP_KERNEL.0 / 2, SBP_KERNEL.1 / 2),
            rng,
        ),
    }
}
