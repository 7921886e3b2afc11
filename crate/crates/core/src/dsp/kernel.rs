//! CQT kernel construction: Q factor, center frequencies, window lengths,
//! and the complex-valued analysis kernels.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::window::hann;
use crate::error::{Error, Result};

/// Parameters of a constant-Q kernel bank.
///
/// Bin `k` (1-based) has center frequency `f1 * 2^((k-1)/B)`; the bank spans
/// `n_octaves` octaves of `bins_per_octave` bins each, all built for sample
/// rate `fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtParams {
    /// Lowest center frequency in Hz.
    pub f1: f64,
    /// Bins per octave (`B`).
    pub bins_per_octave: usize,
    /// Sample rate the kernels are built at, in Hz.
    pub fs: f64,
    /// Number of octaves covered by the bank.
    pub n_octaves: usize,
    /// Hop between analysis frames, in samples at `fs`.
    pub hop: usize,
}

impl CqtParams {
    /// Total number of bins `K = B * n_octaves`.
    pub fn n_bins(&self) -> usize {
        self.bins_per_octave * self.n_octaves
    }

    /// Checks the structural invariants: positive `f1`, `B >= 1`, `hop >= 1`,
    /// and the top bin strictly below Nyquist at the build rate.
    pub fn validate(&self) -> Result<()> {
        if !(self.f1 > 0.0) || !self.f1.is_finite() {
            return Err(Error::invalid_parameter("f1", "must be positive and finite"));
        }
        if self.bins_per_octave == 0 {
            return Err(Error::invalid_parameter("bins_per_octave", "must be >= 1"));
        }
        if self.hop == 0 {
            return Err(Error::invalid_parameter("hop", "must be >= 1"));
        }
        if self.n_octaves == 0 {
            return Err(Error::invalid_parameter("n_octaves", "must be >= 1"));
        }
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(Error::invalid_parameter("fs", "must be positive and finite"));
        }
        let top = center_frequency(self.n_bins(), self.f1, self.bins_per_octave)?;
        if top >= self.fs / 2.0 {
            return Err(Error::invalid_parameter(
                "n_octaves",
                format!(
                    "top bin at {top:.1} Hz reaches Nyquist ({} Hz)",
                    self.fs / 2.0
                ),
            ));
        }
        Ok(())
    }
}

/// Constant Q factor for `bins_per_octave` bins per octave:
/// `Q = (2^(1/B) - 1)^-1`.
pub fn q_factor(bins_per_octave: usize) -> Result<f64> {
    if bins_per_octave == 0 {
        return Err(Error::invalid_parameter("bins_per_octave", "must be >= 1"));
    }
    Ok((2f64.powf(1.0 / bins_per_octave as f64) - 1.0).recip())
}

/// Center frequency of bin `k` (1-based): `f1 * 2^((k-1)/B)`.
///
/// The octave part is applied as an exact power-of-two scaling so that
/// `center_frequency(k + B) == 2 * center_frequency(k)` holds bit-exactly.
pub fn center_frequency(k: usize, f1: f64, bins_per_octave: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid_parameter("k", "bin index is 1-based"));
    }
    if bins_per_octave == 0 {
        return Err(Error::invalid_parameter("bins_per_octave", "must be >= 1"));
    }
    let idx = k - 1;
    let octave = (idx / bins_per_octave) as i32;
    let rem = idx % bins_per_octave;
    let within = f1 * 2f64.powf(rem as f64 / bins_per_octave as f64);
    Ok(within * 2f64.powi(octave))
}

/// Window length in samples for a bin at `f_k`: `round((fs / f_k) * Q)`,
/// rounded half-up.
pub fn window_length(f_k: f64, fs: f64, bins_per_octave: usize) -> Result<usize> {
    if !(f_k > 0.0) || f_k >= fs / 2.0 {
        return Err(Error::invalid_parameter(
            "f_k",
            format!("must satisfy 0 < f_k < fs/2, got {f_k} at fs {fs}"),
        ));
    }
    let q = q_factor(bins_per_octave)?;
    let n = (fs / f_k * q + 0.5).floor();
    Ok((n as usize).max(1))
}

/// Builds the complex analysis kernel for bin `k` of `params`:
/// element `n` is `(1/N_k) * w(n/N_k) * exp(-i 2 pi n Q / N_k)` with a Hann
/// window, for `n` in `0..N_k`.
pub fn make_kernel(k: usize, params: &CqtParams) -> Result<Vec<Complex64>> {
    if k == 0 || k > params.n_bins() {
        return Err(Error::invalid_parameter(
            "k",
            format!("bin index {k} outside 1..={}", params.n_bins()),
        ));
    }
    let q = q_factor(params.bins_per_octave)?;
    let f_k = center_frequency(k, params.f1, params.bins_per_octave)?;
    let n_k = window_length(f_k, params.fs, params.bins_per_octave)?;
    let inv_n = 1.0 / n_k as f64;
    let mut kernel = Vec::with_capacity(n_k);
    for n in 0..n_k {
        let t = n as f64 * inv_n;
        let amp = hann(t) * inv_n;
        let phase = -2.0 * PI * n as f64 * q * inv_n;
        kernel.push(Complex64::new(amp * phase.cos(), amp * phase.sin()));
    }
    Ok(kernel)
}

/// A full bank of CQT kernels with their center frequencies and lengths.
#[derive(Debug, Clone)]
pub struct KernelBank {
    pub params: CqtParams,
    /// Constant Q factor shared by every bin.
    pub q: f64,
    /// Center frequency per bin, low to high.
    pub center_freqs: Vec<f64>,
    /// Window length per bin.
    pub window_lengths: Vec<usize>,
    /// Complex kernel per bin, `window_lengths[k]` samples each.
    pub kernels: Vec<Vec<Complex64>>,
}

impl KernelBank {
    /// Builds all `B * n_octaves` kernels and checks the bank invariants
    /// (octave doubling of center frequencies, non-increasing lengths).
    pub fn new(params: CqtParams) -> Result<Self> {
        params.validate()?;
        let n_bins = params.n_bins();
        let q = q_factor(params.bins_per_octave)?;
        let mut center_freqs = Vec::with_capacity(n_bins);
        let mut window_lengths = Vec::with_capacity(n_bins);
        let mut kernels = Vec::with_capacity(n_bins);
        for k in 1..=n_bins {
            let f_k = center_frequency(k, params.f1, params.bins_per_octave)?;
            center_freqs.push(f_k);
            window_lengths.push(window_length(f_k, params.fs, params.bins_per_octave)?);
            kernels.push(make_kernel(k, &params)?);
        }
        for k in 1..n_bins {
            if window_lengths[k] > window_lengths[k - 1] {
                return Err(Error::invalid_parameter(
                    "fs",
                    format!(
                        "window lengths not non-increasing at bin {}: {} > {}",
                        k + 1,
                        window_lengths[k],
                        window_lengths[k - 1]
                    ),
                ));
            }
        }
        Ok(KernelBank {
            params,
            q,
            center_freqs,
            window_lengths,
            kernels,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.kernels.len()
    }
}
