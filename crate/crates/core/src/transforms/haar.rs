//! Orthonormal 2-D Haar filter bank.
//!
//! For each 2x2 block `[[a, b], [c, d]]`:
//!
//! ```text
//! ll = (a + b + c + d) / 2    hl = (a - b + c - d) / 2
//! lh = (a + b - c - d) / 2    hh = (a - b - c + d) / 2
//! ```
//!
//! Odd dimensions are padded by repeating the last row/column (symmetric
//! half-sample extension) and cropped again on reconstruction.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{GrayImage, Plane};

/// Detail subbands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub lh: Plane,
    pub hl: Plane,
    pub hh: Plane,
    /// Dimensions of the image this level decomposed.
    pub source_dims: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    /// Approximation band of the coarsest level.
    pub ll: Plane,
    /// Detail bands, finest level first.
    pub details: Vec<DetailBands>,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Detail bands of the coarsest level (the ones paired with `ll`).
    pub fn coarsest(&self) -> &DetailBands {
        self.details.last().expect("decomposition has at least one level")
    }

    pub fn energy(&self) -> f64 {
        self.ll.energy()
            + self
                .details
                .iter()
                .map(|d| d.lh.energy() + d.hl.energy() + d.hh.energy())
                .sum::<f64>()
    }
}

fn half(n: usize) -> usize {
    n.div_ceil(2)
}

fn analyze(img: &Plane) -> (Plane, DetailBands) {
    let (w, h) = img.dims();
    let (hw, hh_) = (half(w), half(h));
    // Reflect-padded sample access.
    let at = |x: usize, y: usize| img.get(x.min(w - 1), y.min(h - 1));
    let mut ll = Plane::zeros(hw, hh_);
    let mut lh = Plane::zeros(hw, hh_);
    let mut hl = Plane::zeros(hw, hh_);
    let mut hh = Plane::zeros(hw, hh_);
    for j in 0..hh_ {
        for i in 0..hw {
            let a = at(2 * i, 2 * j);
            let b = at(2 * i + 1, 2 * j);
            let c = at(2 * i, 2 * j + 1);
            let d = at(2 * i + 1, 2 * j + 1);
            ll.set(i, j, (a + b + c + d) / 2.0);
            hl.set(i, j, (a - b + c - d) / 2.0);
            lh.set(i, j, (a + b - c - d) / 2.0);
            hh.set(i, j, (a - b - c + d) / 2.0);
        }
    }
    (
        ll,
        DetailBands {
            lh,
            hl,
            hh,
            source_dims: (w, h),
        },
    )
}

fn synthesize(ll: &Plane, d: &DetailBands) -> Plane {
    let (w, h) = d.source_dims;
    Plane::from_fn(w, h, |x, y| {
        let (i, j) = (x / 2, y / 2);
        let (s, l, g, t) = (ll.get(i, j), d.hl.get(i, j), d.lh.get(i, j), d.hh.get(i, j));
        match (x % 2, y % 2) {
            (0, 0) => (s + l + g + t) / 2.0,
            (1, 0) => (s - l + g - t) / 2.0,
            (0, 1) => (s + l - g - t) / 2.0,
            _ => (s - l - g + t) / 2.0,
        }
    })
}

/// Multi-level decomposition; each level recurses on the previous `ll`.
pub fn haar_decompose(img: &Plane, levels: usize) -> Result<WaveletDecomposition> {
    if levels == 0 {
        return Err(Error::Domain("wavelet levels must be at least 1".into()));
    }
    let (w, h) = img.dims();
    if w < 2 || h < 2 {
        return Err(Error::Domain(format!("{w}x{h} image is too small to decompose")));
    }
    if levels >= usize::BITS as usize || w.min(h) < (1 << levels) {
        return Err(Error::Domain(format!(
            "{w}x{h} image cannot be decomposed {levels} times"
        )));
    }
    let mut details = Vec::with_capacity(levels);
    let (mut ll, d) = analyze(img);
    details.push(d);
    for _ in 1..levels {
        let (next, d) = analyze(&ll);
        details.push(d);
        ll = next;
    }
    Ok(WaveletDecomposition { ll, details })
}

pub fn haar_reconstruct(dec: &WaveletDecomposition) -> Result<Plane> {
    if dec.details.is_empty() {
        return Err(Error::Shape("decomposition has no levels".into()));
    }
    let mut current = dec.ll.clone();
    for (level, d) in dec.details.iter().enumerate().rev() {
        let want = (half(d.source_dims.0), half(d.source_dims.1));
        for (name, band) in [("ll", &current), ("lh", &d.lh), ("hl", &d.hl), ("hh", &d.hh)] {
            if band.dims() != want {
                return Err(Error::Shape(format!(
                    "level {level} {name} band is {:?}, expected {:?}",
                    band.dims(),
                    want
                )));
            }
        }
        current = synthesize(&current, d);
    }
    Ok(current)
}

/// Absolute values scaled so the largest is 1; all-zero stays zero.
fn display_band(band: &Plane) -> Plane {
    let abs = band.abs();
    let max = abs.max();
    if max <= 0.0 {
        return abs;
    }
    let (w, h) = abs.dims();
    Plane::from_fn(w, h, |x, y| abs.get(x, y) / max)
}

fn blit(dst: &mut Plane, src: &Plane, ox: usize, oy: usize, max_w: usize, max_h: usize) {
    for y in 0..src.height().min(max_h) {
        for x in 0..src.width().min(max_w) {
            dst.set(ox + x, oy + y, src.get(x, y));
        }
    }
}

fn tile_level(ll_tile: &Plane, d: &DetailBands) -> Plane {
    let (bw, bh) = d.lh.dims();
    let mut out = Plane::zeros(2 * bw, 2 * bh);
    blit(&mut out, ll_tile, 0, 0, bw, bh);
    blit(&mut out, &display_band(&d.hl), bw, 0, bw, bh);
    blit(&mut out, &display_band(&d.lh), 0, bh, bw, bh);
    blit(&mut out, &display_band(&d.hh), bw, bh, bw, bh);
    out
}

/// Tile the subbands into one image: `ll` top-left, `hl` top-right, `lh`
/// bottom-left, `hh` bottom-right, each independently normalized to [0, 1]
/// (detail bands by absolute value). Deeper levels recurse into the top-left
/// quadrant.
///
/// The output is `2 * ceil(w / 2)` by `2 * ceil(h / 2)`, the original size
/// for even dimensions. When an intermediate level has odd size, the coarser
/// tile is cropped to its quadrant.
pub fn wavelet_to_image(dec: &WaveletDecomposition) -> Result<GrayImage> {
    if dec.details.is_empty() {
        return Err(Error::Shape("decomposition has no levels".into()));
    }
    let mut tile = display_band(&dec.ll);
    for (level, d) in dec.details.iter().enumerate().rev() {
        let want = (half(d.source_dims.0), half(d.source_dims.1));
        if [d.lh.dims(), d.hl.dims(), d.hh.dims()].iter().any(|&dims| dims != want) {
            return Err(Error::Shape(format!(
                "level {level} detail bands do not match {want:?}"
            )));
        }
        if tile.width() < want.0 || tile.height() < want.1 {
            return Err(Error::Shape(format!(
                "level {level} approximation smaller than its detail bands"
            )));
        }
        tile = tile_level(&tile, d);
    }
    GrayImage::try_from(tile)
}
