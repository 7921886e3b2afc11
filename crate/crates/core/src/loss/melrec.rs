//! Mel-spectrogram reconstruction loss (L1 on log-mel), with the adjoint
//! chain back to the synthesized waveform.

use num_complex::Complex64;

use crate::dsp::{mel_filterbank, stft, stft_adjoint, MelConfig, MEL_FLOOR};
use crate::error::{Error, Result};

/// L1 distance between the log-mel spectrograms of two equal-length signals.
pub fn mel_l1(reference: &[f64], synthesized: &[f64], fs: f64, cfg: &MelConfig) -> Result<f64> {
    let a = crate::dsp::mel_spectrogram(reference, fs, cfg)?;
    let b = crate::dsp::mel_spectrogram(synthesized, fs, cfg)?;
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::shape_mismatch(
            format!("{}x{}", a.rows, a.cols),
            format!("{}x{}", b.rows, b.cols),
        ));
    }
    let n = a.data.len() as f64;
    Ok(a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n)
}

/// [`mel_l1`] plus `dL/d synthesized`.
pub fn mel_l1_with_grad(
    reference: &[f64],
    synthesized: &[f64],
    fs: f64,
    cfg: &MelConfig,
) -> Result<(f64, Vec<f64>)> {
    let fb = mel_filterbank(fs, cfg)?;
    let ref_mel = crate::dsp::mel_spectrogram(reference, fs, cfg)?;
    let spec = stft(synthesized, fs, cfg.n_fft, cfg.hop)?;
    let n_bins = spec.n_bins;
    let n_frames = spec.n_frames;
    if ref_mel.cols != n_frames {
        return Err(Error::shape_mismatch(
            format!("{} frames", ref_mel.cols),
            format!("{n_frames}"),
        ));
    }

    // Forward: magnitudes, filterbank projection, floored log.
    let mut mags = vec![0.0f64; n_bins * n_frames];
    for k in 0..n_bins {
        for t in 0..n_frames {
            mags[t * n_bins + k] = spec.get(k, t).norm();
        }
    }
    let n_cells = (cfg.n_mels * n_frames) as f64;
    let mut loss = 0.0;
    // dL/d(filterbank output) per (mel, frame); zero where the floor is active.
    let mut dmel = vec![0.0f64; cfg.n_mels * n_frames];
    for m in 0..cfg.n_mels {
        let row = fb.row(m);
        for t in 0..n_frames {
            let frame = &mags[t * n_bins..(t + 1) * n_bins];
            let u: f64 = row.iter().zip(frame).map(|(w, x)| w * x).sum();
            let logv = u.max(MEL_FLOOR).ln();
            let r = ref_mel.get(m, t);
            let diff = logv - r;
            loss += diff.abs() / n_cells;
            if u > MEL_FLOOR {
                let sign = if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 };
                dmel[m * n_frames + t] = sign / (n_cells * u);
            }
        }
    }

    // Chain dmel -> magnitudes -> complex spectrum -> waveform.
    let mut grad_spec = spec.clone();
    for k in 0..n_bins {
        for t in 0..n_frames {
            let mut dmag = 0.0;
            for m in 0..cfg.n_mels {
                let w = fb.get(m, k);
                if w != 0.0 {
                    dmag += w * dmel[m * n_frames + t];
                }
            }
            let z = spec.get(k, t);
            let mag = z.norm();
            grad_spec.data[k * n_frames + t] = if mag > 0.0 {
                Complex64::new(dmag * z.re / mag, dmag * z.im / mag)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    let grad = stft_adjoint(&grad_spec, synthesized.len(), cfg.n_fft);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> MelConfig {
        MelConfig { n_fft: 256, hop: 64, n_mels: 20, fmin: 0.0, fmax: 4000.0 }
    }

    #[test]
    fn identical_signals_cost_nothing() {
        let x: Vec<f64> = (0..1024).map(|t| (t as f64 * 0.05).sin() * 0.5).collect();
        assert_eq!(mel_l1(&x, &x, 8000.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn phase_inversion_is_free() {
        let x: Vec<f64> = (0..1024).map(|t| (t as f64 * 0.07).sin() * 0.4).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let loss = mel_l1(&x, &y, 8000.0, &cfg()).unwrap();
        assert!(loss < 1e-12, "{loss}");
    }

    #[test]
    fn matches_hand_loop_on_random_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a: Vec<f64> = (0..800).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let b: Vec<f64> = (0..800).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let fast = mel_l1(&a, &b, 8000.0, &cfg()).unwrap();
        let ma = crate::dsp::mel_spectrogram(&a, 8000.0, &cfg()).unwrap();
        let mb = crate::dsp::mel_spectrogram(&b, 8000.0, &cfg()).unwrap();
        let mut acc = 0.0;
        for (x, y) in ma.data.iter().zip(mb.data.iter()) {
            acc += (x - y).abs();
        }
        acc /= ma.data.len() as f64;
        assert!((fast - acc).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let reference: Vec<f64> = (0..512).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut syn: Vec<f64> = (0..512).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, grad) = mel_l1_with_grad(&reference, &syn, 8000.0, &cfg()).unwrap();
        let eps = 1e-6;
        let mut worst = 0.0f64;
        for i in (0..512).step_by(37) {
            let orig = syn[i];
            syn[i] = orig + eps;
            let lp = mel_l1(&reference, &syn, 8000.0, &cfg()).unwrap();
            syn[i] = orig - eps;
            let lm = mel_l1(&reference, &syn, 8000.0, &cfg()).unwrap();
            syn[i] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            let err = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-9);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "worst rel err {worst}");
    }
}
