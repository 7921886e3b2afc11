//! Octave-wise splitting of a complex spectrogram into sub-bands.

use num_complex::Complex64;

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};

/// One octave's worth of bins, real and imaginary parts separated.
/// Both matrices are `bins_per_octave x n_frames`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OctaveBand {
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
}

/// A spectrogram split into octaves, lowest first. Concatenating the octaves
/// back together reproduces the source exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBandSet {
    pub bins_per_octave: usize,
    pub n_frames: usize,
    pub frame_hop: usize,
    pub fs: f64,
    pub octaves: Vec<OctaveBand>,
}

/// Splits `spec` into octaves of `bins_per_octave` bins each. Octave `o`
/// (0-based) holds bins `o*B .. (o+1)*B`, low to high.
pub fn split_octaves(spec: &ComplexSpectrogram, bins_per_octave: usize) -> Result<SubBandSet> {
    if bins_per_octave == 0 {
        return Err(Error::invalid_parameter("bins_per_octave", "must be >= 1"));
    }
    if spec.n_bins % bins_per_octave != 0 {
        return Err(Error::InvalidInput(format!(
            "{} bins not divisible into octaves of {}",
            spec.n_bins, bins_per_octave
        )));
    }
    let n_octaves = spec.n_bins / bins_per_octave;
    let frames = spec.n_frames;
    let mut octaves = Vec::with_capacity(n_octaves);
    for o in 0..n_octaves {
        let mut real = Vec::with_capacity(bins_per_octave * frames);
        let mut imag = Vec::with_capacity(bins_per_octave * frames);
        for b in 0..bins_per_octave {
            for z in spec.row(o * bins_per_octave + b) {
                real.push(z.re);
                imag.push(z.im);
            }
        }
        octaves.push(OctaveBand { real, imag });
    }
    Ok(SubBandSet {
        bins_per_octave,
        n_frames: frames,
        frame_hop: spec.frame_hop,
        fs: spec.fs,
        octaves,
    })
}

impl SubBandSet {
    pub fn n_octaves(&self) -> usize {
        self.octaves.len()
    }

    /// Reassembles the original spectrogram bit-exactly.
    pub fn reassemble(&self) -> ComplexSpectrogram {
        let n_bins = self.bins_per_octave * self.octaves.len();
        let mut data = Vec::with_capacity(n_bins * self.n_frames);
        for band in &self.octaves {
            for (re, im) in band.real.iter().zip(band.imag.iter()) {
                data.push(Complex64::new(*re, *im));
            }
        }
        ComplexSpectrogram {
            n_bins,
            n_frames: self.n_frames,
            data,
            frame_hop: self.frame_hop,
            fs: self.fs,
        }
    }
}

/// Octave index (0-based) that holds 0-based bin `k`.
pub fn octave_of_bin(k: usize, bins_per_octave: usize) -> usize {
    k / bins_per_octave
}
