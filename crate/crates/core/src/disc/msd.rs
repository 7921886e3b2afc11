//! Multi-scale discriminators over waveforms: the sub-band CQT discriminator,
//! its no-sub-band ablation, and the STFT baseline.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::subdisc::{shared_front, DiscGrads, DiscriminatorOutput, Front, SpecBatch, SubDiscCtx, SubDiscriminator};
use super::sbp::SbpModule;
use crate::dsp::{stft, stft_adjoint, ComplexSpectrogram};
use crate::engine::{
    build_octave_plan, cqt_fast_adjoint, cqt_fast_with, Alignment, OctavePlan,
    MULTI_SCALE_BINS_PER_OCTAVE, MULTI_SCALE_HOP,
};
use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor4};

/// FFT sizes of the three STFT scales; hop is a quarter of the size.
pub const STFT_SCALES: [usize; 3] = [512, 1024, 2048];

fn spec_batch_from<T: Scalar>(specs: &[ComplexSpectrogram]) -> Result<SpecBatch<T>> {
    let first = &specs[0];
    let (k, frames) = (first.n_bins, first.n_frames);
    for s in specs {
        if s.n_bins != k || s.n_frames != frames {
            return Err(Error::shape_mismatch(
                format!("{k} x {frames}"),
                format!("{} x {}", s.n_bins, s.n_frames),
            ));
        }
    }
    let n = specs.len();
    let mut real = Tensor4::zeros(n, 1, k, frames);
    let mut imag = Tensor4::zeros(n, 1, k, frames);
    for (item, s) in specs.iter().enumerate() {
        for (i, z) in s.data.iter().enumerate() {
            real.data[item * k * frames + i] = T::from_f64(z.re);
            imag.data[item * k * frames + i] = T::from_f64(z.im);
        }
    }
    Ok(SpecBatch { real, imag })
}

fn complex_grad_for_item<T: Scalar>(
    dreal: &Tensor4<T>,
    dimag: &Tensor4<T>,
    item: usize,
    frame_hop: usize,
    fs: f64,
) -> ComplexSpectrogram {
    let (k, frames) = (dreal.h, dreal.w);
    let base = item * k * frames;
    let data = (0..k * frames)
        .map(|i| Complex64::new(dreal.data[base + i].to_f64(), dimag.data[base + i].to_f64()))
        .collect();
    ComplexSpectrogram { n_bins: k, n_frames: frames, data, frame_hop, fs }
}

/// One CQT scale: its octave plan plus the sub-discriminator applied to it.
#[derive(Debug, Clone)]
pub struct CqtScale<T = f32> {
    pub bins_per_octave: usize,
    pub plan: OctavePlan,
    pub sub: SubDiscriminator<T>,
}

/// Multi-scale CQT discriminator. With sub-band fronts this is the full
/// model; with the shared front it is the ablation that drops sub-band
/// processing. The CQT is taken raw (causal chain), which carries the
/// inter-octave desynchronization the sub-band front is built to absorb.
#[derive(Debug, Clone)]
pub struct CqtDiscriminator<T = f32> {
    pub scales: Vec<CqtScale<T>>,
    pub fs: f64,
    pub f1: f64,
    pub hop: usize,
    pub alignment: Alignment,
}

pub struct CqtDiscCtx<T = f32> {
    per_scale: Vec<SubDiscCtx<T>>,
    signal_len: usize,
}

impl<T: Scalar> CqtDiscriminator<T> {
    fn build(
        fs: f64,
        f1: f64,
        hop: usize,
        sub_band: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut scales = Vec::with_capacity(MULTI_SCALE_BINS_PER_OCTAVE.len());
        for &b in MULTI_SCALE_BINS_PER_OCTAVE.iter() {
            let plan = build_octave_plan(fs, f1, b)?;
            let front = if sub_band {
                Front::SubBand {
                    real: SbpModule::new(plan.n_octaves(), b, rng),
                    imag: SbpModule::new(plan.n_octaves(), b, rng),
                }
            } else {
                shared_front(rng)
            };
            scales.push(CqtScale { bins_per_octave: b, plan, sub: SubDiscriminator::new(front, rng) });
        }
        Ok(CqtDiscriminator { scales, fs, f1, hop, alignment: Alignment::Raw })
    }

    /// Full model: per-octave sub-band fronts.
    pub fn new_sub_band(fs: f64, f1: f64, hop: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::build(fs, f1, hop, true, rng)
    }

    /// Ablation: one shared convolution over the unsplit spectrogram.
    pub fn new_shared(fs: f64, f1: f64, hop: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::build(fs, f1, hop, false, rng)
    }

    pub fn with_default_scales(fs: f64, rng: &mut impl Rng) -> Result<Self> {
        Self::new_sub_band(fs, crate::engine::DEFAULT_F1, MULTI_SCALE_HOP, rng)
    }

    /// Forward over a batch of equal-length signals; one output per scale,
    /// batch stacked in the tensor N axis.
    pub fn forward_batch(
        &self,
        signals: &[&[f64]],
    ) -> Result<(Vec<DiscriminatorOutput<T>>, CqtDiscCtx<T>)> {
        if signals.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let len = signals[0].len();
        if signals.iter().any(|s| s.len() != len) {
            return Err(Error::InvalidInput("batch signals must share a length".into()));
        }
        let mut outputs = Vec::with_capacity(self.scales.len());
        let mut ctxs = Vec::with_capacity(self.scales.len());
        for scale in &self.scales {
            let specs: Vec<ComplexSpectrogram> = signals
                .par_iter()
                .map(|s| cqt_fast_with(s, &scale.plan, self.hop, self.alignment))
                .collect::<Result<Vec<_>>>()?;
            let batch = spec_batch_from::<T>(&specs)?;
            let (out, ctx) = scale.sub.forward(&batch)?;
            outputs.push(out);
            ctxs.push(ctx);
        }
        Ok((outputs, CqtDiscCtx { per_scale: ctxs, signal_len: len }))
    }

    /// Single-signal forward: one output per scale.
    pub fn forward_signal(&self, signal: &[f64]) -> Result<Vec<DiscriminatorOutput<T>>> {
        Ok(self.forward_batch(&[signal])?.0)
    }

    /// Backward pass. Accumulates parameter gradients; when
    /// `want_signal_grads` is set, also chains through the CQT and returns
    /// `dL/dsignal` per batch item.
    pub fn backward(
        &mut self,
        ctx: &CqtDiscCtx<T>,
        grads: &[DiscGrads<T>],
        want_signal_grads: bool,
    ) -> Result<Option<Vec<Vec<f64>>>> {
        if grads.len() != self.scales.len() {
            return Err(Error::shape_mismatch(
                format!("{} scale grads", self.scales.len()),
                format!("{}", grads.len()),
            ));
        }
        let mut signal_grads: Option<Vec<Vec<f64>>> = None;
        for (i, scale) in self.scales.iter_mut().enumerate() {
            let (dreal, dimag) = scale.sub.backward(&ctx.per_scale[i], &grads[i])?;
            if !want_signal_grads {
                continue;
            }
            let hop = self.hop;
            let alignment = self.alignment;
            let plan = &scale.plan;
            let per_item: Vec<Vec<f64>> = (0..dreal.n)
                .into_par_iter()
                .map(|item| {
                    let g = complex_grad_for_item(&dreal, &dimag, item, hop, self.fs);
                    cqt_fast_adjoint(&g, plan, hop, alignment, ctx.signal_len)
                })
                .collect::<Result<Vec<_>>>()?;
            match &mut signal_grads {
                None => signal_grads = Some(per_item),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(per_item.iter()) {
                        for (x, y) in a.iter_mut().zip(g.iter()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        Ok(signal_grads)
    }

    pub fn zero_grads(&mut self) {
        for s in &mut self.scales {
            s.sub.zero_grads();
        }
    }

    pub fn visit_params_impl(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        for s in &mut self.scales {
            let prefix = format!("b{}", s.bins_per_octave);
            s.sub.visit_params(&prefix, f);
        }
    }

    pub fn param_count(&self) -> usize {
        self.scales.iter().map(|s| s.sub.param_count()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> CqtDiscriminator<U> {
        CqtDiscriminator {
            scales: self
                .scales
                .iter()
                .map(|s| CqtScale {
                    bins_per_octave: s.bins_per_octave,
                    plan: s.plan.clone(),
                    sub: s.sub.cast(),
                })
                .collect(),
            fs: self.fs,
            f1: self.f1,
            hop: self.hop,
            alignment: self.alignment,
        }
    }
}

impl<T: Scalar> crate::nn::ParamSet<T> for CqtDiscriminator<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        self.visit_params_impl(f);
    }
}

/// One STFT resolution plus its sub-discriminator.
#[derive(Debug, Clone)]
pub struct StftScale<T = f32> {
    pub n_fft: usize,
    pub hop: usize,
    pub sub: SubDiscriminator<T>,
}

/// Multi-scale STFT discriminator (real/imag as input channels, no front).
#[derive(Debug, Clone)]
pub struct StftDiscriminator<T = f32> {
    pub scales: Vec<StftScale<T>>,
    pub fs: f64,
}

pub struct StftDiscCtx<T = f32> {
    per_scale: Vec<SubDiscCtx<T>>,
    signal_len: usize,
}

impl<T: Scalar> StftDiscriminator<T> {
    pub fn new(fs: f64, rng: &mut impl Rng) -> Self {
        let scales = STFT_SCALES
            .iter()
            .map(|&n_fft| StftScale {
                n_fft,
                hop: n_fft / 4,
                sub: SubDiscriminator::new(Front::Channels, rng),
            })
            .collect();
        StftDiscriminator { scales, fs }
    }

    pub fn forward_batch(
        &self,
        signals: &[&[f64]],
    ) -> Result<(Vec<DiscriminatorOutput<T>>, StftDiscCtx<T>)> {
        if signals.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let len = signals[0].len();
        if signals.iter().any(|s| s.len() != len) {
            return Err(Error::InvalidInput("batch signals must share a length".into()));
        }
        let mut outputs = Vec::with_capacity(self.scales.len());
        let mut ctxs = Vec::with_capacity(self.scales.len());
        for scale in &self.scales {
            let specs: Vec<ComplexSpectrogram> = signals
                .par_iter()
                .map(|s| stft(s, self.fs, scale.n_fft, scale.hop))
                .collect::<Result<Vec<_>>>()?;
            let batch = spec_batch_from::<T>(&specs)?;
            let (out, ctx) = scale.sub.forward(&batch)?;
            outputs.push(out);
            ctxs.push(ctx);
        }
        Ok((outputs, StftDiscCtx { per_scale: ctxs, signal_len: len }))
    }

    pub fn forward_signal(&self, signal: &[f64]) -> Result<Vec<DiscriminatorOutput<T>>> {
        Ok(self.forward_batch(&[signal])?.0)
    }

    pub fn backward(
        &mut self,
        ctx: &StftDiscCtx<T>,
        grads: &[DiscGrads<T>],
        want_signal_grads: bool,
    ) -> Result<Option<Vec<Vec<f64>>>> {
        if grads.len() != self.scales.len() {
            return Err(Error::shape_mismatch(
                format!("{} scale grads", self.scales.len()),
                format!("{}", grads.len()),
            ));
        }
        let mut signal_grads: Option<Vec<Vec<f64>>> = None;
        for (i, scale) in self.scales.iter_mut().enumerate() {
            let (dreal, dimag) = scale.sub.backward(&ctx.per_scale[i], &grads[i])?;
            if !want_signal_grads {
                continue;
            }
            let per_item: Vec<Vec<f64>> = (0..dreal.n)
                .into_par_iter()
                .map(|item| {
                    let g = complex_grad_for_item(&dreal, &dimag, item, scale.hop, self.fs);
                    stft_adjoint(&g, ctx.signal_len, scale.n_fft)
                })
                .collect();
            match &mut signal_grads {
                None => signal_grads = Some(per_item),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(per_item.iter()) {
                        for (x, y) in a.iter_mut().zip(g.iter()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        Ok(signal_grads)
    }

    pub fn zero_grads(&mut self) {
        for s in &mut self.scales {
            s.sub.zero_grads();
        }
    }

    pub fn param_count(&self) -> usize {
        self.scales.iter().map(|s| s.sub.param_count()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> StftDiscriminator<U> {
        StftDiscriminator {
            scales: self
                .scales
                .iter()
                .map(|s| StftScale { n_fft: s.n_fft, hop: s.hop, sub: s.sub.cast() })
                .collect(),
            fs: self.fs,
        }
    }
}

impl<T: Scalar> crate::nn::ParamSet<T> for StftDiscriminator<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        for s in &mut self.scales {
            let prefix = format!("fft{}", s.n_fft);
            s.sub.visit_params(&prefix, f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_signal(len: usize, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect()
    }

    // Small rate keeps the octave plans tiny for unit tests.
    fn tiny_cqt_disc(sub_band: bool) -> CqtDiscriminator<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        if sub_band {
            CqtDiscriminator::new_sub_band(2000.0, 150.0, 8, &mut rng).unwrap()
        } else {
            CqtDiscriminator::new_shared(2000.0, 150.0, 8, &mut rng).unwrap()
        }
    }

    #[test]
    fn cqt_disc_produces_three_outputs_with_distinct_bins() {
        let disc = tiny_cqt_disc(true);
        let signal = tiny_signal(64, 1);
        let outs = disc.forward_signal(&signal).unwrap();
        assert_eq!(outs.len(), 3);
        for (out, scale) in outs.iter().zip(disc.scales.iter()) {
            assert_eq!(out.features.len(), 6);
            assert_eq!(out.features[0].h, scale.plan.n_bins());
        }
    }

    #[test]
    fn ablation_has_strictly_fewer_parameters() {
        let full = tiny_cqt_disc(true);
        let ablation = tiny_cqt_disc(false);
        assert!(ablation.param_count() < full.param_count());
    }

    #[test]
    fn cqt_disc_accepts_one_hop_of_signal() {
        let disc = tiny_cqt_disc(true);
        let outs = disc.forward_signal(&tiny_signal(8, 2)).unwrap();
        assert_eq!(outs.len(), 3);
        for out in &outs {
            assert!(out.score.h > 0 && out.score.w > 0);
        }
    }

    #[test]
    fn stft_disc_three_outputs_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let disc = StftDiscriminator::<f32>::new(24000.0, &mut rng);
        let signal = tiny_signal(4096, 3);
        let a = disc.forward_signal(&signal).unwrap();
        let b = disc.forward_signal(&signal).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.score.data, y.score.data);
            assert_eq!(x.features.len(), 5);
        }
    }

    #[test]
    fn backward_returns_signal_gradients_when_asked() {
        let mut disc = tiny_cqt_disc(true);
        let signals = [tiny_signal(64, 7), tiny_signal(64, 8)];
        let refs: Vec<&[f64]> = signals.iter().map(|s| s.as_slice()).collect();
        let (outs, ctx) = disc.forward_batch(&refs).unwrap();
        disc.zero_grads();
        let grads: Vec<DiscGrads<f32>> = outs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                DiscGrads::score_only(
                    crate::nn::projection_grad(o.score.shape(), 40 + i as u64),
                    o.features.len(),
                )
            })
            .collect();
        let sg = disc.backward(&ctx, &grads, true).unwrap().unwrap();
        assert_eq!(sg.len(), 2);
        assert_eq!(sg[0].len(), 64);
        assert!(sg[0].iter().any(|&v| v != 0.0));
        // Param-only backward skips the signal gradients.
        let (_, ctx2) = disc.forward_batch(&refs).unwrap();
        assert!(disc.backward(&ctx2, &grads, false).unwrap().is_none());
    }
}
