use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{check_dims, ColorImage, DepthImage};

/// Joint (cross) bilateral filter guided by a color image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilateralParams {
    /// Window half-extent; the window is `(2 * radius + 1)^2`.
    pub radius: usize,
    /// Gaussian sigma on pixel distance.
    pub sigma_spatial: f64,
    /// Gaussian sigma on Euclidean RGB distance (intensity units).
    pub sigma_range: f64,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self {
            radius: 3,
            sigma_spatial: 3.0,
            sigma_range: 10.0,
        }
    }
}

impl BilateralParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::invalid("bilateral radius must be positive"));
        }
        for (name, v) in [("sigma_spatial", self.sigma_spatial), ("sigma_range", self.sigma_range)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("bilateral {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[inline]
fn color_dist2(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(&p, &q)| (f64::from(p) - f64::from(q)).powi(2))
        .sum()
}

/// Smooths valid depths and fills holes with a color/spatial weighted mean
/// over valid neighbors. A hole is filled when some valid neighbor has a
/// non-zero kernel weight.
pub fn bilateral_depth_filter(z: &DepthImage, img: &ColorImage, params: &BilateralParams) -> Result<DepthImage> {
    params.validate()?;
    check_dims(z.dims(), img.dims())?;
    let (w, h) = z.dims();
    let r = params.radius as isize;
    let inv_s = 1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
    let inv_r = 1.0 / (2.0 * params.sigma_range * params.sigma_range);

    let out: Vec<Option<f64>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let ci = img.get_index(i);
            let mut num = 0.0;
            let mut den = 0.0;
            for yy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                    let j = yy as usize * w + xx as usize;
                    let Some(zj) = z.get_index(j) else { continue };
                    let ds2 = ((xx - x).pow(2) + (yy - y).pow(2)) as f64;
                    let wgt = (-ds2 * inv_s - color_dist2(ci, img.get_index(j)) * inv_r).exp();
                    num += wgt * zj;
                    den += wgt;
                }
            }
            (den > 0.0).then(|| num / den)
        })
        .collect();
    Ok(DepthImage::from_options(w, h, out))
}
