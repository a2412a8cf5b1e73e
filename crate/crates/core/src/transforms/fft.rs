//! Discrete Fourier transforms of arbitrary length and the 2-D magnitude
//! spectrum.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform.
//! Other lengths go through Bluestein's chirp-z algorithm, which turns the
//! DFT into a power-of-two circular convolution, so no input is ever
//! zero-padded.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::image::{GrayImage, Plane};

#[derive(Debug, Clone)]
enum Plan {
    Trivial,
    Radix2 {
        twiddles: Vec<Complex64>,
    },
    Bluestein {
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
        inner: Box<Fft>,
    },
}

/// A forward DFT plan for one length, `X[k] = sum_n x[n] exp(-2πi kn/N)`.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    plan: Plan,
}

fn unit(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

impl Fft {
    pub fn new(len: usize) -> Self {
        let plan = if len <= 1 {
            Plan::Trivial
        } else if len.is_power_of_two() {
            Plan::Radix2 {
                twiddles: (0..len / 2).map(|k| unit(-2.0 * PI * k as f64 / len as f64)).collect(),
            }
        } else {
            let m = (2 * len - 1).next_power_of_two();
            // exp(-πi n²/N); n² is reduced mod 2N to keep the angle small.
            let chirp: Vec<Complex64> = (0..len)
                .map(|n| {
                    let n2 = (n as u128 * n as u128 % (2 * len as u128)) as f64;
                    unit(-PI * n2 / len as f64)
                })
                .collect();
            let inner = Fft::new(m);
            let mut kernel = vec![Complex64::new(0.0, 0.0); m];
            kernel[0] = chirp[0].conj();
            for n in 1..len {
                kernel[n] = chirp[n].conj();
                kernel[m - n] = chirp[n].conj();
            }
            inner.process(&mut kernel);
            Plan::Bluestein {
                chirp,
                kernel_spectrum: kernel,
                inner: Box::new(inner),
            }
        };
        Self { len, plan }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform. Panics if `buf.len() != self.len()`.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.plan {
            Plan::Trivial => {}
            Plan::Radix2 { twiddles } => radix2(buf, twiddles),
            Plan::Bluestein {
                chirp,
                kernel_spectrum,
                inner,
            } => {
                let m = inner.len();
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for ((dst, x), w) in a.iter_mut().zip(buf.iter()).zip(chirp) {
                    *dst = x * w;
                }
                inner.process(&mut a);
                for (v, k) in a.iter_mut().zip(kernel_spectrum) {
                    *v = (*v * k).conj();
                }
                // Inverse via conjugation: ifft(z) = conj(fft(conj(z))) / m.
                inner.process(&mut a);
                let scale = 1.0 / m as f64;
                for ((dst, v), w) in buf.iter_mut().zip(&a).zip(chirp) {
                    *dst = v.conj() * scale * w;
                }
            }
        }
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn process_inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.process(buf);
        let scale = 1.0 / self.len.max(1) as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

fn radix2(buf: &mut [Complex64], twiddles: &[Complex64]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let stride = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let t = buf[start + k + half] * twiddles[k * stride];
                let u = buf[start + k];
                buf[start + k] = u + t;
                buf[start + k + half] = u - t;
            }
        }
        size *= 2;
    }
}

/// Row-major 2-D forward DFT of a `width x height` complex grid.
pub fn fft2d(data: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    assert_eq!(data.len(), width * height, "grid size mismatch");
    let mut out = data.to_vec();
    let rows = Fft::new(width);
    for row in out.chunks_exact_mut(width.max(1)) {
        rows.process(row);
    }
    let cols = Fft::new(height);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for (y, c) in column.iter_mut().enumerate() {
            *c = out[y * width + x];
        }
        cols.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            out[y * width + x] = *c;
        }
    }
    out
}

/// Unshifted `|F(u, v)|` of a real image; DC at `(0, 0)`.
pub fn magnitude_raw(img: &Plane) -> Plane {
    let (w, h) = img.dims();
    let input: Vec<Complex64> = img.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spectrum = fft2d(&input, w, h);
    let values = spectrum.iter().map(|c| c.norm()).collect();
    Plane::new(w, h, values).expect("magnitudes are finite")
}

/// Circularly shift so the DC bin lands at `(w / 2, h / 2)`.
pub fn fft_shift(plane: &Plane) -> Plane {
    let (w, h) = plane.dims();
    let (sx, sy) = (w / 2, h / 2);
    Plane::from_fn(w, h, |x, y| plane.get((x + w - sx) % w, (y + h - sy) % h))
}

/// Centered, log-compressed (`ln(1 + m)`) and unit-normalized magnitude
/// spectrum.
pub fn fft_spectrum(img: &GrayImage) -> GrayImage {
    let shifted = fft_shift(&magnitude_raw(img.as_plane()));
    let (w, h) = shifted.dims();
    let compressed: Vec<f64> = shifted.values().iter().map(|&m| libm::log1p(m)).collect();
    GrayImage::new(w, h, compressed)
        .expect("log magnitudes are finite and non-negative")
        .normalize_unit()
}
