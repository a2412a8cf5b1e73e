//! Image transforms applied between rendering and classification.

pub mod fft;
pub mod haar;
pub mod resize;

use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub use fft::{fft2d, fft_shift, fft_spectrum, magnitude_raw, Fft};
pub use haar::{haar_decompose, haar_reconstruct, wavelet_to_image, DetailBands, WaveletDecomposition};
pub use resize::resize_bilinear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformKind {
    Identity,
    FftSpectrum,
    HaarWavelet,
}

impl TransformKind {
    pub const ALL: [TransformKind; 3] = [
        TransformKind::Identity,
        TransformKind::FftSpectrum,
        TransformKind::HaarWavelet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Identity => "identity",
            TransformKind::FftSpectrum => "fft",
            TransformKind::HaarWavelet => "haar",
        }
    }

    /// Prefix for comparison-table row labels.
    pub fn title_prefix(self) -> &'static str {
        match self {
            TransformKind::Identity => "",
            TransformKind::FftSpectrum => "FFT of ",
            TransformKind::HaarWavelet => "Haar of ",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown transform `{s}` (expected identity, fft or haar)")))
    }
}

/// Apply one transform and return a classifier-ready non-negative image.
pub fn apply_transform(img: &GrayImage, kind: TransformKind, haar_levels: usize) -> Result<GrayImage> {
    match kind {
        TransformKind::Identity => Ok(img.clone()),
        TransformKind::FftSpectrum => Ok(fft_spectrum(img)),
        TransformKind::HaarWavelet => wavelet_to_image(&haar_decompose(img.as_plane(), haar_levels)?),
    }
}
