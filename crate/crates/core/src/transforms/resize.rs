use alloc::format;

use crate::error::{Error, Result};
use crate::image::{GrayImage, Plane};

/// Bilinear resampling with corner-aligned grids: output pixel `i` samples
/// input coordinate `i * (in - 1) / (out - 1)`, so corners map to corners.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Domain(format!("cannot resize to {out_w}x{out_h}")));
    }
    let (w, h) = img.dims();
    if (w, h) == (out_w, out_h) {
        return Ok(img.clone());
    }
    if w == 0 || h == 0 {
        return Err(Error::EmptyInput("cannot resize an empty image"));
    }
    let coord = |i: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        if n_out == 1 || n_in == 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let i0 = (libm::floor(s) as usize).min(n_in - 2);
        (i0, i0 + 1, s - i0 as f64)
    };
    let plane = Plane::from_fn(out_w, out_h, |x, y| {
        let (x0, x1, fx) = coord(x, w, out_w);
        let (y0, y1, fy) = coord(y, h, out_h);
        let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
        let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    });
    // Convex combinations of non-negative values can round to -0.0 at worst.
    GrayImage::try_from(plane)
}
