//! Octave decomposition plan for the fast CQT.

use super::resample::{down_filter, DOWN_TAPS};
use crate::dsp::{CqtParams, KernelBank};
use crate::error::{Error, Result};

/// Lowest center frequency used throughout: C1.
pub const DEFAULT_F1: f64 = 32.7;

/// Precomputed description of the octave-stacked transform.
///
/// Kernels are built at twice the original rate so the top octave stays
/// clear of the working Nyquist; every octave below the top is handled by
/// decimating the signal by two and reusing the same normalized-frequency
/// kernel layout.
#[derive(Debug, Clone)]
pub struct OctavePlan {
    /// Full-range parameters at the build rate `2 * fs_original`.
    pub params: CqtParams,
    /// Rate of the signal the transform is applied to.
    pub fs_original: f64,
    /// Kernel bank for the top octave (`B` bins) at the build rate.
    pub top_bank: KernelBank,
    /// Effective sample rate per octave, lowest octave first; halves exactly
    /// each step down from `2 * fs_original`.
    pub octave_rates: Vec<f64>,
    /// Anti-alias filter used between octaves.
    pub antialias_taps: Vec<f64>,
}

impl OctavePlan {
    pub fn n_octaves(&self) -> usize {
        self.params.n_octaves
    }

    pub fn bins_per_octave(&self) -> usize {
        self.params.bins_per_octave
    }

    pub fn n_bins(&self) -> usize {
        self.params.n_bins()
    }

    /// Build-rate sample count of the anti-alias group delay per stage.
    pub(crate) fn stage_delay(&self) -> usize {
        (DOWN_TAPS - 1) / 2
    }
}

/// Maximal octave count whose top octave still starts below the original
/// Nyquist: the largest `n` with `f1 * 2^(n-1) < fs/2`.
fn octave_count(fs_original: f64, f1: f64) -> usize {
    let mut n = 0;
    let mut f = f1;
    while f < fs_original / 2.0 {
        n += 1;
        f *= 2.0;
    }
    n
}

/// Builds an [`OctavePlan`] for signals at `fs_original`.
pub fn build_octave_plan(fs_original: f64, f1: f64, bins_per_octave: usize) -> Result<OctavePlan> {
    if !(fs_original > 0.0) || !fs_original.is_finite() {
        return Err(Error::invalid_parameter("fs_original", "must be positive"));
    }
    if !(f1 > 0.0) || !f1.is_finite() {
        return Err(Error::invalid_parameter("f1", "must be positive"));
    }
    if bins_per_octave == 0 {
        return Err(Error::invalid_parameter("bins_per_octave", "must be >= 1"));
    }
    let n_octaves = octave_count(fs_original, f1);
    if n_octaves == 0 {
        return Err(Error::invalid_parameter(
            "f1",
            format!("{f1} Hz leaves no room for even one octave below {} Hz", fs_original / 2.0),
        ));
    }
    let fs_build = 2.0 * fs_original;
    let params = CqtParams {
        f1,
        bins_per_octave,
        fs: fs_build,
        n_octaves,
        hop: 256,
    };
    params.validate()?;
    // Top octave as a one-octave bank; exact power-of-two scaling keeps its
    // center frequencies bit-identical to the top rows of the full bank.
    let top_f1 = f1 * 2f64.powi(n_octaves as i32 - 1);
    let top_bank = KernelBank::new(CqtParams {
        f1: top_f1,
        bins_per_octave,
        fs: fs_build,
        n_octaves: 1,
        hop: params.hop,
    })?;
    let octave_rates = (0..n_octaves)
        .map(|o| fs_build / 2f64.powi((n_octaves - 1 - o) as i32))
        .collect();
    Ok(OctavePlan {
        params,
        fs_original,
        top_bank,
        octave_rates,
        antialias_taps: down_filter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::center_frequency;

    #[test]
    fn octave_counts_for_reference_rates() {
        let p = build_octave_plan(24000.0, 32.7, 24).unwrap();
        assert_eq!(p.n_octaves(), 9);
        let p = build_octave_plan(16000.0, 32.7, 24).unwrap();
        assert_eq!(p.n_octaves(), 8);
    }

    #[test]
    fn quarter_nyquist_start_gives_single_octave() {
        let p = build_octave_plan(24000.0, 6000.0, 24).unwrap();
        assert_eq!(p.n_octaves(), 1);
    }

    #[test]
    fn too_high_f1_is_rejected() {
        assert!(build_octave_plan(24000.0, 12000.0, 24).is_err());
        assert!(build_octave_plan(24000.0, 15000.0, 24).is_err());
    }

    #[test]
    fn top_bin_stays_below_build_nyquist() {
        let p = build_octave_plan(24000.0, 32.7, 24).unwrap();
        let top = center_frequency(p.n_bins(), 32.7, 24).unwrap();
        assert!(top < p.params.fs / 2.0);
        // ~16.3 kHz for nine octaves from C1.
        assert!((top - 16265.776371570131).abs() < 1e-6);
    }

    #[test]
    fn octave_rates_halve_exactly() {
        let p = build_octave_plan(24000.0, 32.7, 24).unwrap();
        assert_eq!(p.octave_rates.len(), 9);
        assert_eq!(*p.octave_rates.last().unwrap(), 48000.0);
        for w in p.octave_rates.windows(2) {
            assert_eq!(w[1], 2.0 * w[0]);
        }
    }

    #[test]
    fn top_bank_matches_full_bank_top_rows() {
        let p = build_octave_plan(24000.0, 32.7, 24).unwrap();
        let b = p.bins_per_octave();
        let k0 = (p.n_octaves() - 1) * b;
        for i in 0..b {
            let full = center_frequency(k0 + i + 1, 32.7, 24).unwrap();
            assert_eq!(p.top_bank.center_freqs[i], full);
        }
    }

    #[test]
    fn octave_frequencies_rescale_onto_top_bank() {
        // Normalized frequency f/rate of octave o bin b equals the top
        // octave's normalized frequency exactly, which is what lets the plan
        // reuse one kernel layout per octave.
        let p = build_octave_plan(24000.0, 32.7, 24).unwrap();
        let b = p.bins_per_octave();
        for o in 0..p.n_octaves() {
            let rate = p.octave_rates[o];
            for i in 0..b {
                let f = center_frequency(o * b + i + 1, 32.7, 24).unwrap();
                let top_f = p.top_bank.center_freqs[i];
                assert_eq!(f / rate, top_f / p.params.fs);
            }
        }
    }
}
