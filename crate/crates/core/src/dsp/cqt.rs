//! The direct (definition-level) constant-Q transform.

use num_complex::Complex64;
use rayon::prelude::*;

use super::kernel::KernelBank;
use super::reflect_index;
use crate::error::{Error, Result};

/// A bins-by-frames complex spectrogram, bin-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    /// Row-major: `data[bin * n_frames + frame]`.
    pub data: Vec<Complex64>,
    /// Hop between frames in samples at `fs`.
    pub frame_hop: usize,
    /// Sample rate the frames refer to, in Hz.
    pub fs: f64,
}

impl ComplexSpectrogram {
    pub fn zeros(n_bins: usize, n_frames: usize, frame_hop: usize, fs: f64) -> Self {
        ComplexSpectrogram {
            n_bins,
            n_frames,
            data: vec![Complex64::new(0.0, 0.0); n_bins * n_frames],
            frame_hop,
            fs,
        }
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.n_frames + frame]
    }

    pub fn row(&self, bin: usize) -> &[Complex64] {
        &self.data[bin * self.n_frames..(bin + 1) * self.n_frames]
    }

    /// Errors if any entry is NaN or infinite.
    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self
            .data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }

    /// Frobenius norm of the matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Relative Frobenius distance `|self - other|_F / |other|_F`.
    pub fn relative_error_to(&self, other: &ComplexSpectrogram) -> f64 {
        assert_eq!(self.n_bins, other.n_bins);
        assert_eq!(self.n_frames, other.n_frames);
        let diff: f64 = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diff / other.frobenius_norm()
    }
}

/// Direct CQT of `signal` against `bank`, frames centered every `hop` samples.
///
/// Frame `m` is centered at sample `m * hop`; each bin correlates the
/// reflect-extended signal with its kernel, the window starting
/// `floor(N_k / 2)` samples before the frame center. `n_frames` is
/// `ceil(len / hop)`.
pub fn cqt_direct(signal: &[f64], bank: &KernelBank, hop: usize) -> Result<ComplexSpectrogram> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if hop == 0 {
        return Err(Error::invalid_parameter("hop", "must be >= 1"));
    }
    let len = signal.len();
    let n_frames = len.div_ceil(hop);
    let n_bins = bank.n_bins();

    let rows: Vec<Vec<Complex64>> = (0..n_bins)
        .into_par_iter()
        .map(|bin| {
            let kernel = &bank.kernels[bin];
            let n_k = kernel.len() as i64;
            let half = n_k / 2;
            let mut row = Vec::with_capacity(n_frames);
            for m in 0..n_frames {
                let center = (m * hop) as i64;
                let start = center - half;
                let mut acc = Complex64::new(0.0, 0.0);
                if start >= 0 && start + n_k <= len as i64 {
                    // Fully interior window: no index folding needed.
                    let s = start as usize;
                    for (t, a) in kernel.iter().enumerate() {
                        acc += signal[s + t] * a.conj();
                    }
                } else {
                    for (t, a) in kernel.iter().enumerate() {
                        let x = signal[reflect_index(start + t as i64, len)];
                        acc += x * a.conj();
                    }
                }
                row.push(acc);
            }
            row
        })
        .collect();

    let mut data = Vec::with_capacity(n_bins * n_frames);
    for row in rows {
        data.extend(row);
    }
    let out = ComplexSpectrogram {
        n_bins,
        n_frames,
        data,
        frame_hop: hop,
        fs: bank.params.fs,
    };
    out.check_finite("cqt_direct")?;
    Ok(out)
}
