//! Image files: 8-bit binary PGM (P5) for viewing and the lossless `GZIMG1`
//! raw format for handing images between pipeline stages.
//!
//! `GZIMG1` layout, all little-endian:
//!
//! ```text
//! b"GZIMG1" | width: u32 | height: u32 | width * height f64 values, row-major
//! ```

use std::fs;
use std::path::Path;

use gaze2class_core::GrayImage;

use crate::error::{Error, Result};

pub const GZIMG_MAGIC: &[u8; 6] = b"GZIMG1";

/// P5 bytes of `normalize_unit(img)` quantized as `round(255 * v)`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let unit = img.normalize_unit();
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        unit.values()
            .iter()
            .map(|v| (255.0 * v).round().clamp(0.0, 255.0) as u8),
    );
    out
}

/// Decode an 8-bit P5 image to intensities in [0, 1].
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let bad = |m: &str| Error::format(path, format!("not an 8-bit binary PGM: {m}"));
    let mut pos = 0;
    let mut token = || -> Option<String> {
        // Skip whitespace and `#` comments.
        loop {
            match bytes.get(pos)? {
                b'#' => {
                    while *bytes.get(pos)? != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            pos += 1;
        }
        Some(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token().as_deref() != Some("P5") {
        return Err(bad("missing P5 magic"));
    }
    let mut number = || token().and_then(|t| t.parse::<usize>().ok());
    let (w, h, maxval) = match (number(), number(), number()) {
        (Some(w), Some(h), Some(m)) => (w, h, m),
        _ => return Err(bad("malformed header")),
    };
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be 1..=255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data = bytes.get(pos + 1..).ok_or_else(|| bad("truncated"))?;
    if data.len() != w * h {
        return Err(bad(&format!("expected {} raster bytes, found {}", w * h, data.len())));
    }
    let values = data.iter().map(|&b| f64::from(b) / maxval as f64).collect();
    Ok(GrayImage::new(w, h, values)?)
}

pub fn encode_gzimg(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 8 * img.values().len());
    out.extend_from_slice(GZIMG_MAGIC);
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    for v in img.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_gzimg(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    if bytes.len() < 14 || &bytes[..6] != GZIMG_MAGIC {
        return Err(Error::format(path, "missing GZIMG1 header"));
    }
    let w = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let body = &bytes[14..];
    if body.len() != 8 * w * h {
        return Err(Error::format(
            path,
            format!(
                "expected {} bytes of pixel data for {w}x{h}, found {}",
                8 * w * h,
                body.len()
            ),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GrayImage::new(w, h, values).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(Error::io(path))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path).map_err(Error::io(path))?, path)
}

pub fn write_gzimg(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_gzimg(img)).map_err(Error::io(path))
}

pub fn read_gzimg(path: &Path) -> Result<GrayImage> {
    decode_gzimg(&fs::read(path).map_err(Error::io(path))?, path)
}
