//! Thin DFT wrappers used by the STFT, mel, and fast-convolution paths.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward discrete Fourier transform (unnormalized).
pub fn dft(signal: &[Complex64]) -> Vec<Complex64> {
    let mut buf = signal.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

/// Inverse discrete Fourier transform, normalized by `1/n` so that
/// `idft(dft(x)) == x`.
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

/// Quadratic-time DFT by direct summation. Test oracle only; kept here so the
/// fast path and its oracle live side by side.
pub fn naive_dft(signal: &[Complex64]) -> Vec<Complex64> {
    let n = signal.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, x) in signal.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            acc += x * Complex64::new(phase.cos(), phase.sin());
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![Complex64::new(0.0, 0.0); 32];
        x[0] = Complex64::new(1.0, 0.0);
        for z in dft(&x) {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_tone_gives_delta() {
        let n = 64;
        let m = 5;
        let x: Vec<Complex64> = (0..n)
            .map(|t| {
                let ph = 2.0 * std::f64::consts::PI * (m * t) as f64 / n as f64;
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        let spec = dft(&x);
        for (k, z) in spec.iter().enumerate() {
            if k == m {
                assert!((z.norm() - n as f64).abs() < 1e-9);
            } else {
                assert!(z.norm() < 1e-9, "bin {k} leaked {}", z.norm());
            }
        }
    }

    #[test]
    fn matches_naive_dft_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [13usize, 48, 128] {
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let fast = dft(&x);
            let naive = naive_dft(&x);
            for (a, b) in fast.iter().zip(naive.iter()) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn round_trip_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Complex64> = (0..200)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let back = idft(&dft(&x));
        let err: f64 = x
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "round-trip error {err}");
    }
}
