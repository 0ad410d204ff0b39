//! Square grayscale images and the PSNR quality metric.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Peak value used by [`psnr`]; fixed at the 8-bit maximum regardless of the
/// actual dynamic range of the inputs.
pub const PSNR_PEAK: f64 = 255.0;

/// An `N x N` real-valued image stored row-major.
///
/// Pixel values are unconstrained while solving; quantization to `[0, 255]`
/// only happens when writing a PGM file.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    side: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("image side must be positive"));
        }
        if pixels.len() != side * side {
            return Err(Error::invalid(format!(
                "expected {} pixels for a {side}x{side} image, got {}",
                side * side,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "pixel ({}, {}) is not finite",
                i / side,
                i % side
            )));
        }
        Ok(Self { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        Self::filled(side, 0.0)
    }

    pub fn filled(side: usize, value: f64) -> Self {
        assert!(side > 0 && value.is_finite());
        Self {
            side,
            pixels: vec![value; side * side],
        }
    }

    /// Builds an image from `f(row, col)`. Panics if `f` returns a non-finite value.
    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(side > 0);
        let pixels: Vec<f64> = (0..side * side).map(|i| f(i / side, i % side)).collect();
        assert!(pixels.iter().all(|v| v.is_finite()), "non-finite pixel");
        Self { side, pixels }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub(crate) fn from_raw(side: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), side * side);
        Self { side, pixels }
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn distance(&self, other: &Image) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `||self - reference|| / ||reference||`.
    pub fn relative_error(&self, reference: &Image) -> f64 {
        let denom = reference.norm();
        if denom == 0.0 {
            self.norm()
        } else {
            self.distance(reference) / denom
        }
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.side != other.side {
            return Err(Error::invalid(format!(
                "dimension mismatch: {0}x{0} vs {1}x{1}",
                self.side, other.side
            )));
        }
        Ok(())
    }
}

/// A PSNR value in decibels. Identical images give `+inf`, reported as
/// `"identical"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Psnr(pub f64);

impl Psnr {
    pub fn is_identical(&self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn db(&self) -> f64 {
        self.0
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identical() {
            f.write_str("identical")
        } else {
            write!(f, "{:.2} dB", self.0)
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_identical() {
            serializer.serialize_str("identical")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

/// `20 log10(255 / RMSE)`.
pub fn psnr(reference: &Image, test: &Image) -> Result<Psnr> {
    reference.same_shape(test)?;
    let mse = reference
        .pixels
        .iter()
        .zip(&test.pixels)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(Psnr(f64::INFINITY));
    }
    Ok(Psnr(20.0 * (PSNR_PEAK / mse.sqrt()).log10()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Image::new(0, vec![]).is_err());
        assert!(Image::new(2, vec![1.0; 3]).is_err());
        assert!(Image::new(2, vec![1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Image::new(2, vec![1.0, 2.0, 3.0, f64::INFINITY]).is_err());
        assert!(Image::new(2, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn psnr_identical_is_sentinel() {
        let a = Image::from_fn(4, |r, c| (r * 4 + c) as f64);
        let p = psnr(&a, &a).unwrap();
        assert!(p.is_identical());
        assert_eq!(p.to_string(), "identical");
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"identical\"");
    }

    #[test]
    fn psnr_uniform_errors() {
        let zero = Image::zeros(3);
        assert_eq!(psnr(&zero, &Image::filled(3, 255.0)).unwrap().db(), 0.0);
        let p = psnr(&zero, &Image::filled(3, 1.0)).unwrap().db();
        // 20 log10(255)
        assert!((p - 48.130_803_608_679_1).abs() < 1e-9, "{p}");
    }

    #[test]
    fn psnr_dimension_mismatch() {
        assert!(matches!(
            psnr(&Image::zeros(2), &Image::zeros(3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = Image::from_fn(5, |r, c| ((r * 7 + c * 3) % 11) as f64);
        let b = Image::from_fn(5, |r, c| ((r * 5 + c * 2) % 13) as f64);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }
}
