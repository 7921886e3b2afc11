//! Constant-Q transform toolkit and multi-scale sub-band CQT discriminators
//! for GAN vocoder experiments.
//!
//! The crate is organized in layers:
//!
//! * [`dsp`] — reference math: window functions, CQT kernels, the direct
//!   constant-Q transform, DFT/STFT, and mel spectrograms. Everything here is
//!   double precision and serves as the oracle for the faster paths.
//! * [`engine`] — the efficient octave-stacked CQT (compute the top octave,
//!   then recursively downsample by two), 2x pre-upsampling, and the
//!   three-scale CQT set consumed by the discriminators.
//! * [`nn`] — a minimal reverse-mode differentiable tensor core: conv2d with
//!   stride/dilation/padding, weight normalization, leaky ReLU, channel
//!   concatenation, and finite-difference gradient checking.
//! * [`disc`] — the sub-band processing module and the multi-scale CQT/STFT
//!   discriminators built from it.
//! * [`loss`] — adversarial, feature-matching, and mel-reconstruction losses
//!   and their weighted composition.
//! * [`vocoder`] — a deliberately tiny mel-to-waveform generator plus an
//!   adversarial training loop so discriminator effects are observable at
//!   desk scale.
//! * [`metrics`] — WAV I/O, an autocorrelation pitch tracker, and the
//!   objective metrics MCD / F0RMSE / FPC.
//! * [`cli`] — the `cqtd` command-line surface and its file formats.

pub mod cli;
pub mod disc;
pub mod dsp;
pub mod engine;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod vocoder;

pub use error::{Error, Result};
