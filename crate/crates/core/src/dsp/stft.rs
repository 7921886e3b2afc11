//! Short-time Fourier transform with centered frames and a Hann window.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::cqt::ComplexSpectrogram;
use super::reflect_index;
use super::window::hann;
use crate::error::{Error, Result};

/// Number of one-sided bins: `n_fft / 2 + 1`.
pub fn stft_bin_count(n_fft: usize) -> usize {
    n_fft / 2 + 1
}

/// Number of frames produced for a signal of `len` samples: `ceil(len/hop)`.
pub fn stft_frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

/// STFT with reflect-padded centered frames, periodic Hann window, and
/// `n_fft/2 + 1` one-sided bins. Unlike the CQT, the bin spacing `fs/n_fft`
/// is constant over the whole axis.
pub fn stft(signal: &[f64], fs: f64, n_fft: usize, hop: usize) -> Result<ComplexSpectrogram> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if hop == 0 || n_fft == 0 {
        return Err(Error::invalid_parameter("hop", "n_fft and hop must be >= 1"));
    }
    if n_fft < hop {
        return Err(Error::invalid_parameter("n_fft", "must be >= hop"));
    }
    let len = signal.len();
    let n_frames = stft_frame_count(len, hop);
    let n_bins = stft_bin_count(n_fft);
    let window: Vec<f64> = (0..n_fft).map(|n| hann(n as f64 / n_fft as f64)).collect();
    let fft = FftPlanner::new().plan_fft_forward(n_fft);

    let mut out = ComplexSpectrogram::zeros(n_bins, n_frames, hop, fs);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let half = (n_fft / 2) as i64;
    for m in 0..n_frames {
        let center = (m * hop) as i64;
        for n in 0..n_fft {
            let idx = reflect_index(center - half + n as i64, len);
            buf[n] = Complex64::new(signal[idx] * window[n], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            out.data[k * n_frames + m] = buf[k];
        }
    }
    out.check_finite("stft")?;
    Ok(out)
}

/// Adjoint of [`stft`] as a real-linear map, used to propagate gradients from
/// a complex spectrogram back to the waveform.
///
/// Given `g(k, m) = dL/dRe X(k,m) + i dL/dIm X(k,m)` this returns
/// `dL/dx(j)`. Reflect padding contributions are folded back onto their
/// source samples.
pub fn stft_adjoint(grad: &ComplexSpectrogram, signal_len: usize, n_fft: usize) -> Vec<f64> {
    let hop = grad.frame_hop;
    let n_bins = grad.n_bins;
    let n_frames = grad.n_frames;
    debug_assert_eq!(n_bins, stft_bin_count(n_fft));
    let window: Vec<f64> = (0..n_fft).map(|n| hann(n as f64 / n_fft as f64)).collect();
    let fft = FftPlanner::new().plan_fft_inverse(n_fft);

    let mut dx = vec![0.0f64; signal_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let half = (n_fft / 2) as i64;
    for m in 0..n_frames {
        for z in buf.iter_mut() {
            *z = Complex64::new(0.0, 0.0);
        }
        for k in 0..n_bins {
            buf[k] = grad.data[k * n_frames + m];
        }
        // dL/d(frame sample n) = w(n) * Re sum_k g_k e^{+i 2 pi k n / N},
        // which is the unnormalized inverse FFT of the one-sided grads.
        fft.process(&mut buf);
        let center = (m * hop) as i64;
        for n in 0..n_fft {
            let idx = reflect_index(center - half + n as i64, signal_len);
            dx[idx] += window[n] * buf[n].re;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let out = stft(&vec![0.0; 3000], 24000.0, 512, 128).unwrap();
        assert_eq!(out.n_bins, 257);
        assert_eq!(out.n_frames, 3000usize.div_ceil(128));
        assert!(out.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn tone_at_bin_center_peaks_at_analytic_bin() {
        let fs = 24000.0;
        let n_fft = 512;
        for bin in [10usize, 40, 100] {
            let f = bin as f64 * fs / n_fft as f64;
            let x: Vec<f64> = (0..6000)
                .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / fs).sin())
                .collect();
            let out = stft(&x, fs, n_fft, 128).unwrap();
            // Skip frames whose window crosses the signal edges.
            for m in 4..out.n_frames - 4 {
                let mut best = 0;
                let mut best_mag = 0.0;
                for k in 0..out.n_bins {
                    let mag = out.get(k, m).norm();
                    if mag > best_mag {
                        best_mag = mag;
                        best = k;
                    }
                }
                assert_eq!(best, bin, "frame {m}");
            }
        }
    }

    #[test]
    fn bin_spacing_is_constant() {
        let fs = 24000.0;
        let n_fft = 512usize;
        let spacing = fs / n_fft as f64;
        let freqs: Vec<f64> = (0..stft_bin_count(n_fft))
            .map(|k| k as f64 * fs / n_fft as f64)
            .collect();
        for w in freqs.windows(2) {
            assert!((w[1] - w[0] - spacing).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_hop_larger_than_n_fft() {
        let x = vec![0.0; 100];
        assert!(stft(&x, 8000.0, 64, 128).is_err());
    }

    #[test]
    fn adjoint_passes_dot_product_test() {
        // <A x, g> == <x, A^T g> for the real-linear STFT map.
        let fs = 8000.0;
        let n_fft = 128;
        let hop = 32;
        let len = 500;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax = stft(&x, fs, n_fft, hop).unwrap();
        let mut g = ax.clone();
        for z in &mut g.data {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let lhs: f64 = ax
            .data
            .iter()
            .zip(g.data.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        let aty = stft_adjoint(&g, len, n_fft);
        let rhs: f64 = x.iter().zip(aty.iter()).map(|(a, b)| a * b).sum();
        assert!(
            (lhs - rhs).abs() / lhs.abs().max(1.0) < 1e-10,
            "lhs {lhs} rhs {rhs}"
        );
    }
}
