//! Core algorithms for turning eye-tracking fixations into images and
//! classifying them.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and a seed; file formats, the CLI and any
//! parallel scheduling live in the companion `gaze2class` crate.
//!
//! Pipeline stages, in order:
//!
//! * [`gaze`]: fixation recordings, a seeded synthetic cohort generator and
//!   the stratified train/test split.
//! * [`render`]: heatmap, scan-path and fixation-map rasterization.
//! * [`transforms`]: Haar wavelet decomposition, FFT magnitude spectrum and
//!   bilinear resizing.
//! * [`classifier`]: a two-block CNN with softmax head, trained by plain
//!   mini-batch SGD.
//! * [`eval`]: accuracy, confusion matrices and the representation x
//!   transform comparison grid.
#![no_std]
// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod error;
pub mod eval;
pub mod gaze;
pub mod image;
pub mod render;
pub mod seed;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{GrayImage, Plane};
