//! Octave-stacked CQT and its adjoint.
//!
//! The transform upsamples the input by two, mirror-pads it generously, then
//! walks down the octaves: the top octave is analyzed at the build rate and
//! each lower octave on a signal decimated once more. Every octave samples
//! the same build-rate kernels on its own grid, so frame centers line up
//! across octaves and the result tracks the direct transform closely.
//!
//! Two alignments are provided. `Compensated` removes the anti-alias group
//! delay between octaves and is the reference-grade transform. `Raw` keeps
//! each stage causal, so every octave inherits the accumulated filter delay —
//! the inter-octave desynchronization that sub-band processing in the
//! discriminator is designed to absorb.

use num_complex::Complex64;
use rayon::prelude::*;

use super::plan::{build_octave_plan, OctavePlan, DEFAULT_F1};
use super::resample::{decimate_2x, decimate_2x_adjoint, resample_2x_up, resample_2x_up_adjoint};
use crate::dsp::{
    center_frequency, hann, q_factor, reflect_index, window_length, ComplexSpectrogram,
};
use crate::error::{Error, Result};

/// Group-delay handling of the decimation chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// Zero-delay chain; frames line up across octaves.
    Compensated,
    /// Causal chain; lower octaves lag by the accumulated filter delay.
    Raw,
}

/// Bins-per-octave values of the three discriminator scales.
pub const MULTI_SCALE_BINS_PER_OCTAVE: [usize; 3] = [24, 36, 48];

/// Shared hop (in original-rate samples) of the three-scale transform.
pub const MULTI_SCALE_HOP: usize = 256;

/// The three-scale CQT set consumed by the multi-scale discriminator.
#[derive(Debug, Clone)]
pub struct MultiScaleCqt {
    /// One spectrogram per entry of [`MULTI_SCALE_BINS_PER_OCTAVE`].
    pub scales: Vec<ComplexSpectrogram>,
    pub bins_per_octave: [usize; 3],
    /// Hop in samples at the original rate.
    pub hop: usize,
}

/// Geometry shared by the forward and adjoint passes.
pub(crate) struct ChainLayout {
    pub len_build: usize,
    pub pad: usize,
    pub len_padded: usize,
    pub n_frames: usize,
    pub hop_build: usize,
    pub s_max: usize,
}

pub(crate) fn chain_layout(plan: &OctavePlan, signal_len: usize, hop: usize) -> Result<ChainLayout> {
    if signal_len == 0 {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if hop == 0 {
        return Err(Error::invalid_parameter("hop", "must be >= 1"));
    }
    let s_max = plan.n_octaves() - 1;
    if s_max >= 32 {
        return Err(Error::invalid_parameter("n_octaves", "too many octaves"));
    }
    let hop_build = 2 * hop;
    let grid = 1usize << s_max;
    if hop_build % grid != 0 {
        return Err(Error::invalid_parameter(
            "hop",
            format!(
                "2*hop must be divisible by 2^(n_octaves-1) = {grid} so all octaves share the frame grid"
            ),
        ));
    }
    let n_long = window_length(plan.params.f1, plan.params.fs, plan.bins_per_octave())?;
    let halo = 64usize << s_max;
    let pad_raw = n_long / 2 + 2 * hop_build + halo + 64;
    let pad = pad_raw.div_ceil(grid) * grid;
    let len_build = 2 * signal_len;
    Ok(ChainLayout {
        len_build,
        pad,
        len_padded: len_build + 2 * pad,
        n_frames: signal_len.div_ceil(hop),
        hop_build,
        s_max,
    })
}

fn delay_offset(plan: &OctavePlan, alignment: Alignment) -> usize {
    match alignment {
        Alignment::Compensated => plan.stage_delay(),
        Alignment::Raw => 0,
    }
}

/// Build-rate kernel for global bin `k`, sampled every `2^s`-th tap for use
/// on the stage-`s` decimated signal. `coeffs[r + radius]` multiplies the
/// decimated sample `radius` positions left of the frame center plus `r`.
struct BinCoeffs {
    radius: usize,
    coeffs: Vec<Complex64>,
}

fn bin_coeffs(k: usize, plan: &OctavePlan, stage: usize) -> Result<BinCoeffs> {
    let params = &plan.params;
    let q = q_factor(params.bins_per_octave)?;
    let f_k = center_frequency(k, params.f1, params.bins_per_octave)?;
    let n_k = window_length(f_k, params.fs, params.bins_per_octave)?;
    let half = n_k / 2;
    let step = 1usize << stage;
    let mut radius = half / step;
    while half + radius * step > n_k - 1 {
        radius -= 1;
    }
    let inv_n = 1.0 / n_k as f64;
    let scale = step as f64 * inv_n;
    let mut coeffs = Vec::with_capacity(2 * radius + 1);
    for r in -(radius as i64)..=(radius as i64) {
        let n = (half as i64 + r * step as i64) as usize;
        let t = n as f64 * inv_n;
        let amp = hann(t) * scale;
        // Conjugate of the analysis kernel, so the phase rotates positively.
        let phase = 2.0 * std::f64::consts::PI * n as f64 * q * inv_n;
        coeffs.push(Complex64::new(amp * phase.cos(), amp * phase.sin()));
    }
    Ok(BinCoeffs { radius, coeffs })
}

fn build_stages(padded: Vec<f64>, plan: &OctavePlan, s_max: usize, offset: usize) -> Vec<Vec<f64>> {
    let mut stages = Vec::with_capacity(s_max + 1);
    stages.push(padded);
    for s in 1..=s_max {
        let next = decimate_2x(&stages[s - 1], &plan.antialias_taps, offset);
        stages.push(next);
    }
    stages
}

/// Fast octave-stacked CQT with the chosen alignment. `hop` is given in
/// samples at the original rate.
pub fn cqt_fast_with(
    signal: &[f64],
    plan: &OctavePlan,
    hop: usize,
    alignment: Alignment,
) -> Result<ComplexSpectrogram> {
    let layout = chain_layout(plan, signal.len(), hop)?;
    let up = resample_2x_up(signal);
    let mut padded = vec![0.0f64; layout.len_padded];
    for (i, v) in padded.iter_mut().enumerate() {
        *v = up[reflect_index(i as i64 - layout.pad as i64, layout.len_build)];
    }
    let stages = build_stages(padded, plan, layout.s_max, delay_offset(plan, alignment));

    let b = plan.bins_per_octave();
    let n_bins = plan.n_bins();
    let n_frames = layout.n_frames;
    let rows: Vec<Result<Vec<Complex64>>> = (0..n_bins)
        .into_par_iter()
        .map(|bin| {
            let octave = bin / b; // 0 = lowest
            let s = layout.s_max - octave;
            let bc = bin_coeffs(bin + 1, plan, s)?;
            let x = &stages[s];
            let pad_s = layout.pad >> s;
            let hop_s = layout.hop_build >> s;
            let mut row = Vec::with_capacity(n_frames);
            for m in 0..n_frames {
                let center = pad_s + m * hop_s;
                let start = center - bc.radius;
                let window = &x[start..start + bc.coeffs.len()];
                let mut acc = Complex64::new(0.0, 0.0);
                for (xv, cv) in window.iter().zip(bc.coeffs.iter()) {
                    acc += xv * cv;
                }
                row.push(acc);
            }
            Ok(row)
        })
        .collect();

    let mut data = Vec::with_capacity(n_bins * n_frames);
    for row in rows {
        data.extend(row?);
    }
    let out = ComplexSpectrogram {
        n_bins,
        n_frames,
        data,
        frame_hop: hop,
        fs: plan.fs_original,
    };
    out.check_finite("cqt_fast")?;
    Ok(out)
}

/// Fast CQT with the compensated (reference) alignment.
pub fn cqt_fast(signal: &[f64], plan: &OctavePlan, hop: usize) -> Result<ComplexSpectrogram> {
    cqt_fast_with(signal, plan, hop, Alignment::Compensated)
}

/// Adjoint of [`cqt_fast_with`] as a real-linear map.
///
/// `grad` carries `dL/dRe + i dL/dIm` per spectrogram cell; the return value
/// is `dL/dx` for a signal of `signal_len` samples. Used to propagate
/// discriminator gradients back to the waveform.
pub fn cqt_fast_adjoint(
    grad: &ComplexSpectrogram,
    plan: &OctavePlan,
    hop: usize,
    alignment: Alignment,
    signal_len: usize,
) -> Result<Vec<f64>> {
    let layout = chain_layout(plan, signal_len, hop)?;
    if grad.n_bins != plan.n_bins() || grad.n_frames != layout.n_frames {
        return Err(Error::shape_mismatch(
            format!("{} x {}", plan.n_bins(), layout.n_frames),
            format!("{} x {}", grad.n_bins, grad.n_frames),
        ));
    }
    let offset = delay_offset(plan, alignment);
    let b = plan.bins_per_octave();
    let s_max = layout.s_max;
    // Stage lengths mirror the forward chain.
    let mut stage_lens = Vec::with_capacity(s_max + 1);
    stage_lens.push(layout.len_padded);
    for s in 1..=s_max {
        stage_lens.push(stage_lens[s - 1].div_ceil(2));
    }

    // Scatter spectrogram gradients into their stage buffers; one octave owns
    // exactly one stage, so octaves parallelize without overlap.
    let mut stage_grads: Vec<Vec<f64>> = stage_lens.iter().map(|&l| vec![0.0f64; l]).collect();
    let per_octave: Vec<Result<(usize, Vec<f64>)>> = (0..plan.n_octaves())
        .into_par_iter()
        .map(|octave| {
            let s = s_max - octave;
            let mut buf = vec![0.0f64; stage_lens[s]];
            let pad_s = layout.pad >> s;
            let hop_s = layout.hop_build >> s;
            for bin_in_oct in 0..b {
                let bin = octave * b + bin_in_oct;
                let bc = bin_coeffs(bin + 1, plan, s)?;
                let row = grad.row(bin);
                for (m, g) in row.iter().enumerate() {
                    let start = pad_s + m * hop_s - bc.radius;
                    for (i, cv) in bc.coeffs.iter().enumerate() {
                        // d/dx of Re(g)*Re(X) + Im(g)*Im(X) with X = sum x*c.
                        buf[start + i] += g.re * cv.re + g.im * cv.im;
                    }
                }
            }
            Ok((s, buf))
        })
        .collect();
    for item in per_octave {
        let (s, buf) = item?;
        stage_grads[s] = buf;
    }

    // Walk the chain adjoint back up to the padded build-rate signal.
    for s in (1..=s_max).rev() {
        let up_grad = decimate_2x_adjoint(&stage_grads[s], stage_lens[s - 1], &plan.antialias_taps, offset);
        let (lower, _) = stage_grads.split_at_mut(s);
        for (a, g) in lower[s - 1].iter_mut().zip(up_grad.iter()) {
            *a += g;
        }
    }

    // Fold the mirror padding back onto the upsampled signal.
    let mut d_up = vec![0.0f64; layout.len_build];
    for (i, &g) in stage_grads[0].iter().enumerate() {
        d_up[reflect_index(i as i64 - layout.pad as i64, layout.len_build)] += g;
    }
    Ok(resample_2x_up_adjoint(&d_up, signal_len))
}

/// Three fast CQTs at B = 24, 36, 48 with a shared hop.
pub fn multi_scale_cqt(signal: &[f64], fs: f64) -> Result<MultiScaleCqt> {
    multi_scale_cqt_with(signal, fs, DEFAULT_F1, MULTI_SCALE_HOP, Alignment::Compensated)
}

/// Three-scale CQT with explicit lowest frequency, hop, and alignment.
pub fn multi_scale_cqt_with(
    signal: &[f64],
    fs: f64,
    f1: f64,
    hop: usize,
    alignment: Alignment,
) -> Result<MultiScaleCqt> {
    let mut scales = Vec::with_capacity(3);
    for &b in MULTI_SCALE_BINS_PER_OCTAVE.iter() {
        let plan = build_octave_plan(fs, f1, b)?;
        scales.push(cqt_fast_with(signal, &plan, hop, alignment)?);
    }
    debug_assert!(scales.windows(2).all(|w| w[0].n_frames == w[1].n_frames));
    Ok(MultiScaleCqt {
        scales,
        bins_per_octave: MULTI_SCALE_BINS_PER_OCTAVE,
        hop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{cqt_direct, KernelBank};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_plan() -> OctavePlan {
        build_octave_plan(6000.0, 30.0, 12).unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let plan = small_plan();
        let out = cqt_fast(&vec![0.0; 2400], &plan, 32).unwrap();
        assert_eq!(out.n_bins, plan.n_bins());
        assert_eq!(out.n_frames, 2400 / 32);
        assert!(out.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn short_signal_degenerates_to_single_frame() {
        let plan = small_plan();
        let out = cqt_fast(&vec![0.1; 10], &plan, 32).unwrap();
        assert_eq!(out.n_frames, 1);
    }

    #[test]
    fn hop_off_the_octave_grid_is_rejected() {
        let plan = small_plan(); // 7 octaves -> 2*hop must divide by 64
        let err = cqt_fast(&vec![0.0; 1000], &plan, 17);
        assert!(err.is_err());
    }

    #[test]
    fn matches_direct_transform_on_random_signal() {
        let plan = small_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let signal: Vec<f64> = (0..2400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = cqt_fast(&signal, &plan, 32).unwrap();

        let up = resample_2x_up(&signal);
        let bank = KernelBank::new(plan.params.clone()).unwrap();
        let direct = cqt_direct(&up, &bank, 64).unwrap();

        assert_eq!(fast.n_frames, direct.n_frames);
        let rel = fast.relative_error_to(&direct);
        assert!(rel < 1e-3, "relative error {rel}");
    }

    #[test]
    fn single_octave_plan_reproduces_direct_exactly() {
        // With one octave there is no decimation; the fast path applies the
        // very same kernels the direct transform uses.
        let plan = build_octave_plan(8000.0, 2000.0, 12).unwrap();
        assert_eq!(plan.n_octaves(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let signal: Vec<f64> = (0..1600).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = cqt_fast(&signal, &plan, 25).unwrap();
        let up = resample_2x_up(&signal);
        let bank = KernelBank::new(plan.params.clone()).unwrap();
        let direct = cqt_direct(&up, &bank, 50).unwrap();
        let rel = fast.relative_error_to(&direct);
        assert!(rel < 1e-13, "relative error {rel}");
    }

    #[test]
    fn adjoint_dot_product_both_alignments() {
        let plan = small_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let len = 700;
        let signal: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for alignment in [Alignment::Compensated, Alignment::Raw] {
            let fwd = cqt_fast_with(&signal, &plan, 32, alignment).unwrap();
            let mut g = fwd.clone();
            for z in &mut g.data {
                *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let lhs: f64 = fwd
                .data
                .iter()
                .zip(g.data.iter())
                .map(|(a, b)| a.re * b.re + a.im * b.im)
                .sum();
            let dx = cqt_fast_adjoint(&g, &plan, 32, alignment, len).unwrap();
            let rhs: f64 = signal.iter().zip(dx.iter()).map(|(a, b)| a * b).sum();
            assert!(
                (lhs - rhs).abs() / lhs.abs().max(1.0) < 1e-9,
                "{alignment:?}: lhs {lhs} rhs {rhs}"
            );
        }
    }

    fn octave_peak_frames(spec: &ComplexSpectrogram, bins_per_octave: usize) -> Vec<Vec<usize>> {
        (0..spec.n_bins / bins_per_octave)
            .map(|o| {
                (0..bins_per_octave)
                    .map(|b| {
                        let row = spec.row(o * bins_per_octave + b);
                        row.iter()
                            .enumerate()
                            .max_by(|(_, x), (_, y)| x.norm().partial_cmp(&y.norm()).unwrap())
                            .unwrap()
                            .0
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn raw_alignment_shows_interoctave_desync_and_compensated_does_not() {
        let plan = build_octave_plan(24000.0, DEFAULT_F1, 24).unwrap();
        // Long enough that the widest kernel never overlaps the impulse's
        // reflect-padding mirror; on a frame center so every octave's peak
        // sits far from an argmax tie even after the raw chain shifts it.
        let mut signal = vec![0.0f64; 30720];
        signal[60 * 256] = 1.0;

        let raw = cqt_fast_with(&signal, &plan, 256, Alignment::Raw).unwrap();
        let peaks = octave_peak_frames(&raw, 24);
        for (o, frames) in peaks.iter().enumerate() {
            assert!(
                frames.iter().all(|&m| m == frames[0]),
                "octave {o} not internally synchronized: {frames:?}"
            );
        }
        let octave_peaks: Vec<usize> = peaks.iter().map(|f| f[0]).collect();
        let max_gap = octave_peaks
            .iter()
            .map(|&p| (p as i64 - octave_peaks[octave_peaks.len() - 1] as i64).abs())
            .max()
            .unwrap();
        assert!(
            max_gap >= 1,
            "expected at least one inter-octave offset, got {octave_peaks:?}"
        );

        let comp = cqt_fast_with(&signal, &plan, 256, Alignment::Compensated).unwrap();
        let peaks = octave_peak_frames(&comp, 24);
        let octave_peaks: Vec<usize> = peaks.iter().map(|f| f[0]).collect();
        assert!(
            octave_peaks.iter().all(|&p| p == octave_peaks[0]),
            "compensated alignment should line octaves up: {octave_peaks:?}"
        );
    }

    #[test]
    fn multi_scale_shapes_and_tone_localization() {
        let fs = 24000.0;
        let f = 440.0;
        let signal: Vec<f64> = (0..7680)
            .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / fs).sin())
            .collect();
        let ms = multi_scale_cqt(&signal, fs).unwrap();
        let n_frames = ms.scales[0].n_frames;
        for (i, &b) in ms.bins_per_octave.iter().enumerate() {
            let spec = &ms.scales[i];
            assert_eq!(spec.n_frames, n_frames);
            let plan = build_octave_plan(fs, DEFAULT_F1, b).unwrap();
            assert_eq!(spec.n_bins, plan.n_bins());
            let expected = (b as f64 * (f / DEFAULT_F1).log2()).round() as usize;
            for m in n_frames / 3..2 * n_frames / 3 {
                let mut best = 0;
                let mut best_mag = 0.0;
                for bin in 0..spec.n_bins {
                    let mag = spec.get(bin, m).norm();
                    if mag > best_mag {
                        best_mag = mag;
                        best = bin;
                    }
                }
                assert_eq!(best, expected, "B={b} frame {m}");
            }
        }
    }
}
