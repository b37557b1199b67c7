//! Row-major image containers with an explicit validity mask.
//!
//! Invalid pixels store `0` in the value buffer, but the mask is authoritative:
//! a pixel is valid exactly when its mask entry is set.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

macro_rules! scalar_image {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            width: usize,
            height: usize,
            data: Vec<f64>,
            mask: Vec<bool>,
        }

        impl $name {
            /// An image where every pixel is invalid.
            pub fn invalid(width: usize, height: usize) -> Self {
                Self {
                    width,
                    height,
                    data: vec![0.0; width * height],
                    mask: vec![false; width * height],
                }
            }

            /// Every pixel set to `value` (invalid everywhere if `value` is not a
            /// positive finite number).
            pub fn constant(width: usize, height: usize, value: f64) -> Self {
                Self::from_fn(width, height, |_, _| Some(value))
            }

            pub fn from_fn(
                width: usize,
                height: usize,
                mut f: impl FnMut(usize, usize) -> Option<f64>,
            ) -> Self {
                let mut img = Self::invalid(width, height);
                for y in 0..height {
                    for x in 0..width {
                        img.set(x, y, f(x, y));
                    }
                }
                img
            }

            /// Builds an image from raw values; `0`, negative and non-finite
            /// entries become invalid.
            pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
                if values.len() != width * height {
                    return Err(Error::invalid(format!(
                        "{} values for a {}x{} image",
                        values.len(),
                        width,
                        height
                    )));
                }
                let mut img = Self::invalid(width, height);
                for (i, v) in values.into_iter().enumerate() {
                    img.set_index(i, Some(v));
                }
                Ok(img)
            }

            // Not every generated image type needs this.
            #[allow(dead_code)]
            pub(crate) fn from_options(width: usize, height: usize, values: Vec<Option<f64>>) -> Self {
                debug_assert_eq!(values.len(), width * height);
                let mut img = Self::invalid(width, height);
                for (i, v) in values.into_iter().enumerate() {
                    img.set_index(i, v);
                }
                img
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn dims(&self) -> (usize, usize) {
                (self.width, self.height)
            }

            pub fn len(&self) -> usize {
                self.data.len()
            }

            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            #[inline]
            pub fn index(&self, x: usize, y: usize) -> usize {
                debug_assert!(x < self.width && y < self.height);
                y * self.width + x
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> Option<f64> {
                self.get_index(self.index(x, y))
            }

            #[inline]
            pub fn get_index(&self, i: usize) -> Option<f64> {
                if self.mask[i] {
                    Some(self.data[i])
                } else {
                    None
                }
            }

            #[inline]
            pub fn is_valid(&self, x: usize, y: usize) -> bool {
                self.mask[self.index(x, y)]
            }

            /// Sets a pixel. `None`, non-positive and non-finite values mark
            /// the pixel invalid.
            #[inline]
            pub fn set(&mut self, x: usize, y: usize, value: Option<f64>) {
                let i = self.index(x, y);
                self.set_index(i, value);
            }

            #[inline]
            pub fn set_index(&mut self, i: usize, value: Option<f64>) {
                match value {
                    Some(v) if v > 0.0 && v.is_finite() => {
                        self.data[i] = v;
                        self.mask[i] = true;
                    }
                    _ => {
                        self.data[i] = 0.0;
                        self.mask[i] = false;
                    }
                }
            }

            /// Raw values; invalid pixels read as 0.
            pub fn values(&self) -> &[f64] {
                &self.data
            }

            pub fn mask(&self) -> &[bool] {
                &self.mask
            }

            pub fn valid_count(&self) -> usize {
                self.mask.iter().filter(|&&m| m).count()
            }

            /// `(x, y, value)` for every valid pixel in raster order.
            pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
                let w = self.width;
                self.mask
                    .iter()
                    .zip(&self.data)
                    .enumerate()
                    .filter(|(_, (m, _))| **m)
                    .map(move |(i, (_, v))| (i % w, i / w, *v))
            }

            /// Applies `f` to every valid pixel; results that are not positive
            /// and finite invalidate the pixel.
            pub fn map_valid(&self, mut f: impl FnMut(f64) -> Option<f64>) -> Self {
                let mut out = Self::invalid(self.width, self.height);
                for i in 0..self.data.len() {
                    if self.mask[i] {
                        out.set_index(i, f(self.data[i]));
                    }
                }
                out
            }
        }
    };
}

scalar_image!(
    /// Per-pixel metric depth along the optical axis (meters).
    DepthImage
);

scalar_image!(
    /// Per-pixel disparity (pixels) for a virtual stereo baseline.
    DisparityImage
);

/// Per-pixel unit surface normals in the camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalImage {
    width: usize,
    height: usize,
    data: Vec<Vector3<f64>>,
    mask: Vec<bool>,
}

impl NormalImage {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Vector3::zeros(); width * height],
            mask: vec![false; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, n: Vector3<f64>) -> Self {
        let mut img = Self::invalid(width, height);
        for i in 0..width * height {
            img.set_index(i, Some(n));
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        self.get_index(self.index(x, y))
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<Vector3<f64>> {
        if self.mask[i] {
            Some(self.data[i])
        } else {
            None
        }
    }

    /// Stores `n` normalized to unit length. Zero-length or non-finite
    /// vectors mark the pixel invalid.
    pub fn set(&mut self, x: usize, y: usize, n: Option<Vector3<f64>>) {
        let i = self.index(x, y);
        self.set_index(i, n);
    }

    pub fn set_index(&mut self, i: usize, n: Option<Vector3<f64>>) {
        let unit = n.and_then(|n| {
            let norm = n.norm();
            (norm > 0.0 && norm.is_finite()).then(|| n / norm)
        });
        match unit {
            Some(u) => {
                self.data[i] = u;
                self.mask[i] = true;
            }
            None => {
                self.data[i] = Vector3::zeros();
                self.mask[i] = false;
            }
        }
    }

    /// Stores an already-unit vector without renormalizing.
    pub(crate) fn set_unit_index(&mut self, i: usize, n: Vector3<f64>) {
        debug_assert!((n.norm() - 1.0).abs() < 1e-6);
        self.data[i] = n;
        self.mask[i] = true;
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.data
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl ColorImage {
    pub fn constant(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "{} pixels for a {}x{} color image",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> [u8; 3] {
        self.data[i]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = y * self.width + x;
        self.data[i] = rgb;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_is_authoritative() {
        let mut img = DepthImage::constant(3, 2, 1.5);
        assert_eq!(img.valid_count(), 6);
        img.set(1, 1, Some(-2.0));
        assert_eq!(img.get(1, 1), None);
        img.set(0, 0, Some(f64::NAN));
        assert!(!img.is_valid(0, 0));
        img.set(2, 0, None);
        assert_eq!(img.valid_count(), 3);
        assert_eq!(img.values()[img.index(2, 0)], 0.0);
    }

    #[test]
    fn from_values_rejects_wrong_length() {
        assert!(DepthImage::from_values(2, 2, vec![1.0; 3]).is_err());
        let img = DepthImage::from_values(2, 2, vec![1.0, 0.0, 2.0, -1.0]).unwrap();
        assert_eq!(img.valid_count(), 2);
        let valid: Vec<_> = img.iter_valid().collect();
        assert_eq!(valid, vec![(0, 0, 1.0), (0, 1, 2.0)]);
    }

    #[test]
    fn normals_are_normalized() {
        let mut n = NormalImage::invalid(1, 1);
        n.set(0, 0, Some(Vector3::new(0.0, 3.0, 4.0)));
        let v = n.get(0, 0).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        n.set(0, 0, Some(Vector3::zeros()));
        assert!(n.get(0, 0).is_none());
    }
}
