//! Rasterize a recording as a heatmap, scan path or fixation map.
//!
//! Screen coordinates are mapped to output pixels by an aspect-preserving
//! affine map centered in the output (letterboxing). Pixel `(px, py)` samples
//! the continuous output plane at integer coordinates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::gaze::GazeRecording;
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Representation {
    Heatmap,
    ScanPath,
    FixationMap,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Heatmap,
        Representation::ScanPath,
        Representation::FixationMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Heatmap => "heatmap",
            Representation::ScanPath => "scanpath",
            Representation::FixationMap => "fixationmap",
        }
    }

    /// Row label in comparison tables.
    pub fn title(self) -> &'static str {
        match self {
            Representation::Heatmap => "Heat Maps",
            Representation::ScanPath => "Scan Paths",
            Representation::FixationMap => "Fixation Maps",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown representation `{s}` (expected heatmap, scanpath or fixationmap)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub representation: Representation,
    pub out_width: usize,
    pub out_height: usize,
    /// Gaussian spread in output pixels (heatmap).
    pub sigma: f64,
    /// Scan-path line width in pixels.
    pub line_thickness: usize,
    /// Marker radius in output pixels per millisecond of dwell.
    pub marker_radius_ms_scale: f64,
    /// Heatmap weight `duration_ms / 1000` per fixation instead of 1.
    pub duration_weighted: bool,
    /// Evaluate every Gaussian over the full grid instead of within
    /// [`KERNEL_CUTOFF_SIGMAS`] of its center.
    pub exact: bool,
}

/// Heatmap kernels are truncated at this many sigmas unless rendering in
/// exact mode; the dropped tail is below `exp(-8)` of the peak.
pub const KERNEL_CUTOFF_SIGMAS: f64 = 4.0;

/// Scan-path marker intensity for the first and last fixation.
pub const RAMP_FIRST: f64 = 1.0;
pub const RAMP_LAST: f64 = 0.3;

/// Fixation-map mark intensity per millisecond of dwell.
pub const FIXATION_INTENSITY_PER_MS: f64 = 1.0 / 1000.0;

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            representation: Representation::Heatmap,
            out_width: 64,
            out_height: 64,
            sigma: 2.0,
            line_thickness: 1,
            marker_radius_ms_scale: 0.006,
            duration_weighted: false,
            exact: false,
        }
    }
}

impl RenderSpec {
    pub fn with_representation(&self, representation: Representation) -> Self {
        Self {
            representation,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_width < 8 || self.out_height < 8 {
            return Err(Error::Config(format!(
                "render size {}x{} is below the 8x8 minimum",
                self.out_width, self.out_height
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.line_thickness == 0 {
            return Err(Error::Config("line_thickness must be at least 1".into()));
        }
        if !(self.marker_radius_ms_scale >= 0.0) || !self.marker_radius_ms_scale.is_finite() {
            return Err(Error::Config("marker_radius_ms_scale must be non-negative".into()));
        }
        Ok(())
    }

    fn max_marker_radius(&self) -> f64 {
        self.out_width.min(self.out_height) as f64 / 8.0
    }
}

/// Isotropic 2-D Gaussian density `exp(-(dx² + dy²) / 2σ²) / 2πσ²`.
pub fn gaussian_kernel(dx: f64, dy: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(gaussian_unchecked(dx, dy, sigma))
}

#[inline]
fn gaussian_unchecked(dx: f64, dy: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    libm::exp(-(dx * dx + dy * dy) / (2.0 * s2)) / (2.0 * core::f64::consts::PI * s2)
}

/// Affine screen-to-output mapping with letterboxing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenMap {
    pub scale: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl ScreenMap {
    pub fn new(screen_width: f64, screen_height: f64, out_width: usize, out_height: usize) -> Self {
        let (ow, oh) = (out_width as f64, out_height as f64);
        let scale = (ow / screen_width).min(oh / screen_height);
        Self {
            scale,
            offset_x: (ow - screen_width * scale) / 2.0,
            offset_y: (oh - screen_height * scale) / 2.0,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.offset_x + x * self.scale, self.offset_y + y * self.scale)
    }
}

fn mapped_points(rec: &GazeRecording, spec: &RenderSpec) -> Result<Vec<(f64, f64)>> {
    if rec.points.is_empty() {
        return Err(Error::EmptyInput("recording has no fixations"));
    }
    spec.validate()?;
    let map = ScreenMap::new(rec.screen_width, rec.screen_height, spec.out_width, spec.out_height);
    Ok(rec.points.iter().map(|p| map.apply(p.x, p.y)).collect())
}

fn check_representation(spec: &RenderSpec, want: Representation) -> Result<()> {
    if spec.representation != want {
        return Err(Error::Config(format!(
            "render spec is for {}, not {}",
            spec.representation, want
        )));
    }
    Ok(())
}

/// Dispatch on `spec.representation`.
pub fn render(rec: &GazeRecording, spec: &RenderSpec) -> Result<GrayImage> {
    match spec.representation {
        Representation::Heatmap => render_heatmap(rec, spec),
        Representation::ScanPath => render_scanpath(rec, spec),
        Representation::FixationMap => render_fixation_map(rec, spec),
    }
}

/// Sum of one Gaussian kernel per fixation, evaluated on the output grid.
pub fn render_heatmap(rec: &GazeRecording, spec: &RenderSpec) -> Result<GrayImage> {
    check_representation(spec, Representation::Heatmap)?;
    let centers = mapped_points(rec, spec)?;
    let (w, h) = (spec.out_width, spec.out_height);
    let mut img = GrayImage::zeros(w, h);
    let sigma = spec.sigma;
    let cutoff2 = (KERNEL_CUTOFF_SIGMAS * sigma) * (KERNEL_CUTOFF_SIGMAS * sigma);
    let values = img.values_mut();
    for (p, &(cx, cy)) in rec.points.iter().zip(&centers) {
        let weight = if spec.duration_weighted {
            p.duration_ms / 1000.0
        } else {
            1.0
        };
        let (x0, x1, y0, y1) = if spec.exact {
            (0, w, 0, h)
        } else {
            let r = KERNEL_CUTOFF_SIGMAS * sigma;
            let lo = |c: f64| libm::ceil(c - r).max(0.0) as usize;
            let hi = |c: f64, n: usize| (libm::floor(c + r) + 1.0).clamp(0.0, n as f64) as usize;
            (lo(cx), hi(cx, w), lo(cy), hi(cy, h))
        };
        for py in y0..y1 {
            let dy = py as f64 - cy;
            let row = &mut values[py * w..(py + 1) * w];
            for (px, v) in row.iter_mut().enumerate().take(x1).skip(x0) {
                let dx = px as f64 - cx;
                if !spec.exact && dx * dx + dy * dy > cutoff2 {
                    continue;
                }
                *v += weight * gaussian_unchecked(dx, dy, sigma);
            }
        }
    }
    Ok(img)
}

/// Integer pixel nearest to a continuous output coordinate, clamped to the grid.
fn pixel_of(p: (f64, f64), w: usize, h: usize) -> (i64, i64) {
    let px = (libm::round(p.0) as i64).clamp(0, w as i64 - 1);
    let py = (libm::round(p.1) as i64).clamp(0, h as i64 - 1);
    (px, py)
}

/// Pixels of the segment between two grid points (Bresenham / midpoint).
/// The endpoints are put in canonical order first so a segment rasterizes
/// identically in either direction.
pub fn segment_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let (dx, dy) = ((b.0 - a.0).abs(), -(b.1 - a.1).abs());
    let (sx, sy) = (if a.0 < b.0 { 1 } else { -1 }, if a.1 < b.1 { 1 } else { -1 });
    let mut err = dx + dy;
    let (mut x, mut y) = a;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Call `f` for every in-bounds pixel within `radius` of `center`.
fn for_disc(center: (i64, i64), radius: f64, w: usize, h: usize, mut f: impl FnMut(usize, usize)) {
    let r = libm::floor(radius) as i64;
    let r2 = radius * radius;
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 > r2 {
                continue;
            }
            let (x, y) = (center.0 + dx, center.1 + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                f(x as usize, y as usize);
            }
        }
    }
}

/// Marker intensity for fixation `i` of `n`, falling linearly from
/// [`RAMP_FIRST`] to [`RAMP_LAST`].
pub fn ramp_intensity(i: usize, n: usize) -> f64 {
    if n < 2 {
        return RAMP_FIRST;
    }
    let t = i as f64 / (n - 1) as f64;
    RAMP_FIRST * (1.0 - t) + RAMP_LAST * t
}

/// Scan-path marker radius in pixels.
pub fn scanpath_marker_radius(duration_ms: f64, spec: &RenderSpec) -> f64 {
    (spec.marker_radius_ms_scale * duration_ms).clamp(1.0, spec.max_marker_radius())
}

/// Polyline through the fixations in onset order at intensity 1, with a disc
/// marker per fixation drawn over it. Marker intensity encodes order; where
/// markers overlap the brighter one wins.
pub fn render_scanpath(rec: &GazeRecording, spec: &RenderSpec) -> Result<GrayImage> {
    check_representation(spec, Representation::ScanPath)?;
    let centers = mapped_points(rec, spec)?;
    let (w, h) = (spec.out_width, spec.out_height);
    let pixels: Vec<(i64, i64)> = centers.iter().map(|&c| pixel_of(c, w, h)).collect();

    let mut img = GrayImage::zeros(w, h);
    let values = img.values_mut();
    let pen = (spec.line_thickness - 1) as f64 / 2.0;
    for pair in pixels.windows(2) {
        for p in segment_pixels(pair[0], pair[1]) {
            for_disc(p, pen, w, h, |x, y| values[y * w + x] = 1.0);
        }
    }

    let mut markers: Vec<Option<f64>> = vec![None; w * h];
    let n = pixels.len();
    for (i, (&c, fix)) in pixels.iter().zip(&rec.points).enumerate() {
        let level = ramp_intensity(i, n);
        for_disc(c, scanpath_marker_radius(fix.duration_ms, spec), w, h, |x, y| {
            let m = &mut markers[y * w + x];
            *m = Some(m.map_or(level, |v| v.max(level)));
        });
    }
    for (v, m) in values.iter_mut().zip(markers) {
        if let Some(level) = m {
            *v = level;
        }
    }
    Ok(img)
}

/// Fixation-map mark radius in pixels; below 1 the mark is a single pixel.
pub fn fixation_mark_radius(duration_ms: f64, spec: &RenderSpec) -> f64 {
    (spec.marker_radius_ms_scale * duration_ms).min(spec.max_marker_radius())
}

/// Unsmoothed marks: every pixel of each fixation's disc gets
/// `duration_ms * FIXATION_INTENSITY_PER_MS` added.
pub fn render_fixation_map(rec: &GazeRecording, spec: &RenderSpec) -> Result<GrayImage> {
    check_representation(spec, Representation::FixationMap)?;
    let centers = mapped_points(rec, spec)?;
    let (w, h) = (spec.out_width, spec.out_height);
    let mut img = GrayImage::zeros(w, h);
    let values = img.values_mut();
    for (&c, fix) in centers.iter().zip(&rec.points) {
        let intensity = fix.duration_ms * FIXATION_INTENSITY_PER_MS;
        let radius = fixation_mark_radius(fix.duration_ms, spec);
        for_disc(pixel_of(c, w, h), radius, w, h, |x, y| values[y * w + x] += intensity);
    }
    Ok(img)
}
