//! Dense row-major intensity grids.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::seed;

/// A row-major grid of finite reals. Used for signed intermediates such as
/// wavelet detail coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at index {i}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub(crate) fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self { width, height, values }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn abs(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| libm::fabs(*v)).collect(),
        }
    }

    pub fn fingerprint(&self) -> u64 {
        seed::fingerprint(&self.values) ^ seed::splitmix64((self.width as u64) << 32 | self.height as u64)
    }
}

/// A non-negative intensity image, the common currency between renderers,
/// transforms and the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Plane);

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::try_from(Plane::new(width, height, values)?)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayImage(Plane::zeros(width, height))
    }

    pub fn as_plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        self.0.values_mut()
    }

    /// Divide by the maximum so the brightest pixel is 1. An all-zero image
    /// is returned unchanged.
    pub fn normalize_unit(&self) -> GrayImage {
        let max = self.max();
        if max <= 0.0 {
            return self.clone();
        }
        let values = self.values().iter().map(|v| v / max).collect();
        GrayImage(Plane {
            width: self.width(),
            height: self.height(),
            values,
        })
    }
}

impl core::ops::Deref for GrayImage {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

impl TryFrom<Plane> for GrayImage {
    type Error = Error;

    fn try_from(plane: Plane) -> Result<Self> {
        if let Some(i) = plane.values.iter().position(|v| *v < 0.0) {
            return Err(Error::Validation(format!("negative intensity at index {i}")));
        }
        Ok(GrayImage(plane))
    }
}

pub fn normalize_unit(img: &GrayImage) -> GrayImage {
    img.normalize_unit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(GrayImage::new(2, 2, vec![0.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(
            GrayImage::new(1, 2, vec![0.0, -1.0]),
            Err(Error::Validation(_))
        ));
        assert!(Plane::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn normalize_zero_image_is_fixed() {
        let z = GrayImage::zeros(4, 4);
        assert_eq!(z.normalize_unit(), z);
    }

    #[test]
    fn normalize_scales_by_max() {
        let img = GrayImage::new(2, 2, vec![0.5, 2.5, 1.0, 0.0]).unwrap();
        let n = img.normalize_unit();
        for (a, b) in img.values().iter().zip(n.values()) {
            assert_eq!(*b, a / 2.5);
        }
        assert_eq!(n.get(1, 0), 1.0);
    }

    proptest! {
        #[test]
        fn normalize_idempotent_and_preserves_argmax_and_zeros(
            values in proptest::collection::vec(0.0f64..10.0, 36)
        ) {
            let img = GrayImage::new(6, 6, values).unwrap();
            let once = img.normalize_unit();
            let twice = once.normalize_unit();
            prop_assert_eq!(&once, &twice);
            let max = img.max();
            for (a, b) in img.values().iter().zip(once.values()) {
                prop_assert_eq!(*a == 0.0, *b == 0.0);
                prop_assert_eq!(*a == max, *b == 1.0);
            }
        }
    }
}
