//! Mel filterbank and log-mel spectrogram (Slaney-style filters).

use super::stft::{stft, stft_bin_count};
use crate::error::{Error, Result};

/// Amplitude floor applied before the log so silence maps to `ln(MEL_FLOOR)`.
pub const MEL_FLOOR: f64 = 1e-5;

/// Mel spectrogram configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl MelConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::invalid_parameter("n_mels", "must be >= 1"));
        }
        if !(self.fmin >= 0.0) || self.fmin >= self.fmax {
            return Err(Error::invalid_parameter("fmin", "need 0 <= fmin < fmax"));
        }
        if self.fmax > fs / 2.0 {
            return Err(Error::invalid_parameter("fmax", "must be <= fs/2"));
        }
        if self.n_fft == 0 || self.hop == 0 || self.n_fft < self.hop {
            return Err(Error::invalid_parameter("n_fft", "need n_fft >= hop >= 1"));
        }
        Ok(())
    }
}

/// Small row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Hz to mel, Slaney variant: linear below 1 kHz, logarithmic above.
fn hz_to_mel(f: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    if f < MIN_LOG_HZ {
        f / F_SP
    } else {
        MIN_LOG_MEL + (f / MIN_LOG_HZ).ln() / (6.4f64.ln() / 27.0)
    }
}

fn mel_to_hz(m: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    if m < MIN_LOG_MEL {
        m * F_SP
    } else {
        MIN_LOG_HZ * ((m - MIN_LOG_MEL) * (6.4f64.ln() / 27.0)).exp()
    }
}

/// Triangular mel filterbank, `n_mels x (n_fft/2 + 1)`, with Slaney
/// normalization (each triangle scaled by `2 / (hz_hi - hz_lo)`).
pub fn mel_filterbank(fs: f64, cfg: &MelConfig) -> Result<RealMatrix> {
    cfg.validate(fs)?;
    let n_bins = stft_bin_count(cfg.n_fft);
    let mel_lo = hz_to_mel(cfg.fmin);
    let mel_hi = hz_to_mel(cfg.fmax);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let mut fb = RealMatrix::zeros(cfg.n_mels, n_bins);
    for m in 0..cfg.n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        for k in 0..n_bins {
            let f = k as f64 * fs / cfg.n_fft as f64;
            let tri = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            fb.set(m, k, tri * norm);
        }
    }
    Ok(fb)
}

/// Log-magnitude mel spectrogram: `ln(max(fb |STFT|, MEL_FLOOR))`,
/// `n_mels x n_frames`.
pub fn mel_spectrogram(signal: &[f64], fs: f64, cfg: &MelConfig) -> Result<RealMatrix> {
    let fb = mel_filterbank(fs, cfg)?;
    let spec = stft(signal, fs, cfg.n_fft, cfg.hop)?;
    let n_frames = spec.n_frames;
    let n_bins = spec.n_bins;
    // Magnitudes, frame-major scratch.
    let mut mags = vec![0.0f64; n_bins * n_frames];
    for k in 0..n_bins {
        for t in 0..n_frames {
            mags[t * n_bins + k] = spec.get(k, t).norm();
        }
    }
    let mut out = RealMatrix::zeros(cfg.n_mels, n_frames);
    for m in 0..cfg.n_mels {
        let row = fb.row(m);
        for t in 0..n_frames {
            let frame = &mags[t * n_bins..(t + 1) * n_bins];
            let acc: f64 = row.iter().zip(frame).map(|(w, x)| w * x).sum();
            out.set(m, t, acc.max(MEL_FLOOR).ln());
        }
    }
    Ok(out)
}
