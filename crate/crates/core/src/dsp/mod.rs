//! Reference DSP layer: windows, CQT kernels, direct CQT, DFT/STFT, mel.
//!
//! All math in this module is double precision and deliberately direct; the
//! faster octave-stacked transform in [`crate::engine`] is validated against
//! it.

mod cqt;
mod fft;
mod kernel;
mod mel;
mod stft;
mod window;

pub use cqt::{cqt_direct, ComplexSpectrogram};
pub use fft::{dft, idft, naive_dft};
pub use kernel::{center_frequency, make_kernel, q_factor, window_length, CqtParams, KernelBank};
pub use mel::{mel_filterbank, mel_spectrogram, MelConfig, RealMatrix, MEL_FLOOR};
pub use stft::{stft, stft_adjoint, stft_bin_count, stft_frame_count};
pub use window::hann;

/// Folds an arbitrary (possibly negative) index into `0..len` by mirror
/// reflection about the signal endpoints, without repeating the edge sample.
pub(crate) fn reflect_index(index: i64, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let mut j = index.rem_euclid(period);
    if j >= len as i64 {
        j = period - j;
    }
    j as usize
}

#[cfg(test)]
mod tests {
    use super::reflect_index;

    #[test]
    fn reflect_index_folds_both_edges() {
        // len 5 -> extension ... 2 1 [0 1 2 3 4] 3 2 1 0 1 2 ...
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-2, 5), 2);
        assert_eq!(reflect_index(0, 5), 0);
        assert_eq!(reflect_index(4, 5), 4);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(6, 5), 2);
        assert_eq!(reflect_index(8, 5), 0);
        assert_eq!(reflect_index(9, 5), 1);
    }

    #[test]
    fn reflect_index_single_sample() {
        assert_eq!(reflect_index(-3, 1), 0);
        assert_eq!(reflect_index(7, 1), 0);
    }
}
