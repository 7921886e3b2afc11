//! Windowed-sinc 2x resamplers (Kaiser window) with reflect edge handling.

use crate::dsp::reflect_index;

/// Tap count of the half-band interpolation filter used for 2x upsampling.
/// Sized so the passband stays within 0.1 dB below 0.45 of the input rate.
const UP_TAPS: usize = 103;

/// Tap count of the anti-alias filter used before decimation. Odd length so
/// the group delay is an integer and the aligned chain can compensate it
/// exactly.
pub(crate) const DOWN_TAPS: usize = 65;

const KAISER_BETA: f64 = 8.0;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Kaiser-windowed sinc low-pass prototype. `cutoff` is in cycles per input
/// sample (0..0.5); DC gain is 2*cutoff*taps-sum-normalized to 1 by design of
/// the sinc prototype (not renormalized further).
pub(crate) fn kaiser_lowpass(taps: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let center = (taps - 1) as f64 / 2.0;
    let denom = bessel_i0(beta);
    (0..taps)
        .map(|t| {
            let u = (t as f64 - center) / center; // -1..1
            let w = bessel_i0(beta * (1.0 - u * u).max(0.0).sqrt()) / denom;
            2.0 * cutoff * sinc(2.0 * cutoff * (t as f64 - center)) * w
        })
        .collect()
}

pub(crate) fn up_filter() -> Vec<f64> {
    // Gain 2 compensates the zero-stuffing energy loss.
    kaiser_lowpass(UP_TAPS, 0.25, KAISER_BETA)
        .into_iter()
        .map(|h| 2.0 * h)
        .collect()
}

pub(crate) fn down_filter() -> Vec<f64> {
    kaiser_lowpass(DOWN_TAPS, 0.25, KAISER_BETA)
}

/// Upsamples by exactly 2x with a windowed-sinc interpolator. The output has
/// `2 * len` samples and is delay-compensated; edges are mirror-extended.
pub fn resample_2x_up(signal: &[f64]) -> Vec<f64> {
    let len = signal.len();
    if len == 0 {
        return Vec::new();
    }
    let h = up_filter();
    let taps = h.len() as i64;
    let center = (taps - 1) / 2;
    let out_len = 2 * len;
    let mut out = vec![0.0f64; out_len];
    for (i, o) in out.iter_mut().enumerate() {
        // Polyphase over source samples: tap index tau = i + center - 2j.
        let i = i as i64;
        let j_min = (i + center - taps + 1).div_euclid(2) + ((i + center - taps + 1).rem_euclid(2) != 0) as i64;
        let j_max = (i + center).div_euclid(2);
        let mut acc = 0.0;
        for j in j_min..=j_max {
            let tau = (i + center - 2 * j) as usize;
            acc += h[tau] * signal[reflect_index(j, len)];
        }
        *o = acc;
    }
    out
}

/// Adjoint of [`resample_2x_up`] as a linear map; folds reflected edge
/// contributions back onto their source samples.
pub fn resample_2x_up_adjoint(grad_out: &[f64], signal_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0f64; signal_len];
    if signal_len == 0 {
        return dx;
    }
    let h = up_filter();
    let taps = h.len() as i64;
    let center = (taps - 1) / 2;
    for (i, &g) in grad_out.iter().enumerate() {
        let i = i as i64;
        let j_min = (i + center - taps + 1).div_euclid(2) + ((i + center - taps + 1).rem_euclid(2) != 0) as i64;
        let j_max = (i + center).div_euclid(2);
        for j in j_min..=j_max {
            let tau = (i + center - 2 * j) as usize;
            dx[reflect_index(j, signal_len)] += h[tau] * g;
        }
    }
    dx
}

/// Anti-alias low-pass then decimation by two. `delay_offset` selects where
/// the filter is anchored: `(taps-1)/2` yields the compensated (zero-delay)
/// output, `0` the raw causal output with the filter's full group delay.
pub(crate) fn decimate_2x(signal: &[f64], taps: &[f64], delay_offset: usize) -> Vec<f64> {
    let len = signal.len();
    let out_len = len.div_ceil(2);
    let mut out = vec![0.0f64; out_len];
    let t_len = taps.len() as i64;
    for (j, o) in out.iter_mut().enumerate() {
        let base = 2 * j as i64 + delay_offset as i64;
        let mut acc = 0.0;
        if base >= t_len - 1 && base < len as i64 {
            let s = (base - t_len + 1) as usize;
            for (t, &ht) in taps.iter().enumerate() {
                acc += ht * signal[s + (t_len as usize - 1 - t)];
            }
        } else {
            for (t, &ht) in taps.iter().enumerate() {
                acc += ht * signal[reflect_index(base - t as i64, len)];
            }
        }
        *o = acc;
    }
    out
}

/// Adjoint of [`decimate_2x`] with the same anchoring.
pub(crate) fn decimate_2x_adjoint(
    grad_out: &[f64],
    signal_len: usize,
    taps: &[f64],
    delay_offset: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0f64; signal_len];
    for (j, &g) in grad_out.iter().enumerate() {
        let base = 2 * j as i64 + delay_offset as i64;
        for (t, &ht) in taps.iter().enumerate() {
            dx[reflect_index(base - t as i64, signal_len)] += ht * g;
        }
    }
    dx
}

/// Anti-alias low-pass then decimate by two (delay-compensated). The output
/// has `ceil(len / 2)` samples.
pub fn downsample_2x(signal: &[f64]) -> Vec<f64> {
    if signal.is_empty() {
        return Vec::new();
    }
    let h = down_filter();
    decimate_2x(signal, &h, (DOWN_TAPS - 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::dft;
    use num_complex::Complex64;

    fn tone(f: f64, fs: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / fs).sin())
            .collect()
    }

    fn spectrum_mag(x: &[f64]) -> Vec<f64> {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        dft(&z).iter().map(|c| c.norm()).collect()
    }

    // Hann-windowed band analysis so edge kinks do not leak across bands.
    fn windowed_spectrum_mag(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let z: Vec<Complex64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = crate::dsp::hann(i as f64 / n as f64);
                Complex64::new(v * w, 0.0)
            })
            .collect();
        dft(&z).iter().map(|c| c.norm()).collect()
    }

    #[test]
    fn dc_stays_dc_at_double_length() {
        let x = vec![0.75; 500];
        let y = resample_2x_up(&x);
        assert_eq!(y.len(), 1000);
        for &v in &y {
            assert!((v - 0.75).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn tone_survives_upsampling_with_matching_peak() {
        let fs = 24000.0;
        let len = 4096;
        let x = tone(1000.0, fs, len);
        let y = resample_2x_up(&x);
        let mags = spectrum_mag(&y);
        let n = y.len();
        let peak = (1..n / 2)
            .max_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap())
            .unwrap();
        let peak_hz = peak as f64 * 2.0 * fs / n as f64;
        assert!((peak_hz - 1000.0).abs() < 2.0 * fs / n as f64 * 2.0);
    }

    #[test]
    fn upsampling_images_below_minus_60_db() {
        let fs = 24000.0;
        let x = tone(1000.0, fs, 4096);
        let y = resample_2x_up(&x);
        let mags = windowed_spectrum_mag(&y);
        let n = y.len();
        let fs2 = 2.0 * fs;
        let band_energy = |lo: f64, hi: f64| -> f64 {
            (0..n / 2)
                .filter(|&k| {
                    let f = k as f64 * fs2 / n as f64;
                    f >= lo && f < hi
                })
                .map(|k| mags[k] * mags[k])
                .sum()
        };
        let below = band_energy(0.0, fs / 2.0);
        let above = band_energy(fs / 2.0, fs2 / 2.0);
        assert!(above / below < 1e-6, "ratio {}", above / below);
    }

    #[test]
    fn passband_ripple_within_tenth_db() {
        let fs = 24000.0;
        let len = 8192;
        for frac in [0.05, 0.15, 0.25, 0.35, 0.449] {
            let f = frac * fs;
            let x = tone(f, fs, len);
            let y = resample_2x_up(&x);
            // Compare RMS over an interior window to dodge edge taper.
            let rms = |v: &[f64]| {
                let s: f64 = v.iter().map(|a| a * a).sum();
                (s / v.len() as f64).sqrt()
            };
            let rin = rms(&x[1000..len - 1000]);
            let rout = rms(&y[2000..2 * len - 2000]);
            let db = 20.0 * (rout / rin).log10();
            assert!(db.abs() < 0.1, "f={f}: {db} dB");
        }
    }

    #[test]
    fn downsample_preserves_tone_and_length() {
        let fs = 48000.0;
        let x = tone(1000.0, fs, 4097);
        let y = downsample_2x(&x);
        assert_eq!(y.len(), 4097usize.div_ceil(2));
        let mags = spectrum_mag(&y);
        let n = y.len();
        let peak = (1..n / 2)
            .max_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap())
            .unwrap();
        let peak_hz = peak as f64 * (fs / 2.0) / n as f64;
        assert!((peak_hz - 1000.0).abs() < 2.0 * (fs / 2.0) / n as f64 * 2.0);
    }

    #[test]
    fn downsample_suppresses_aliases() {
        let fs = 48000.0;
        // 20 kHz sits above the 12 kHz output Nyquist; it must not fold in.
        let x = tone(20000.0, fs, 4096);
        let y = downsample_2x(&x);
        let energy = |v: &[f64]| -> f64 {
            windowed_spectrum_mag(v).iter().map(|m| m * m).sum::<f64>() / v.len() as f64
        };
        let ratio = energy(&y) / energy(&x);
        assert!(ratio < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn up_then_down_is_near_identity() {
        let fs = 24000.0;
        let x = tone(700.0, fs, 3000);
        let y = downsample_2x(&resample_2x_up(&x));
        assert_eq!(y.len(), 3000);
        let err: f64 = x[500..2500]
            .iter()
            .zip(&y[500..2500])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "max err {err}");
    }

    #[test]
    fn upsampler_adjoint_dot_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let len = 333;
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..2 * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax = resample_2x_up(&x);
        let aty = resample_2x_up_adjoint(&g, len);
        let lhs: f64 = ax.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn decimator_adjoint_dot_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let len = 301usize;
        let taps = down_filter();
        for offset in [0usize, (DOWN_TAPS - 1) / 2] {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..len.div_ceil(2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = decimate_2x(&x, &taps, offset);
            let aty = decimate_2x_adjoint(&g, len, &taps, offset);
            let lhs: f64 = ax.iter().zip(&g).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }
}
