//! Sparse-to-dense depth reconstruction guided by surface normals.
//!
//! The full procedure ([`sparse_to_dense`]) runs three filters over the
//! sparse optimized depth:
//!
//! 1. normal-guided filtering restricted to same-superpixel sources,
//! 2. a color-guided bilateral filter that exchanges depth between
//!    superpixels,
//! 3. normal-guided filtering over the plain spatial window.

mod bilateral;
mod filter;
mod superpixel;

pub use bilateral::{bilateral_depth_filter, BilateralParams};
pub use filter::{coplanar_reproject, normal_guided_filter, FilterParams, PARALLEL_EPS};
pub use superpixel::{rgb_to_lab, superpixel_segment, SuperpixelLabels, SuperpixelParams};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, CameraIntrinsics, ColorImage, DepthImage, NormalImage};

/// All parameters of [`sparse_to_dense`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DensifyParams {
    pub filter: FilterParams,
    pub bilateral: BilateralParams,
    pub superpixel: SuperpixelParams,
}

/// Intermediate and final outputs of the three-step reconstruction.
#[derive(Clone, Debug)]
pub struct DensifySteps {
    pub labels: SuperpixelLabels,
    /// After superpixel-restricted normal filtering.
    pub segment_filled: DepthImage,
    /// After bilateral filtering.
    pub smoothed: DepthImage,
    /// Final dense depth.
    pub dense: DepthImage,
}

/// Reconstructs dense depth from sparse seeds, predicted normals and the color image.
pub fn sparse_to_dense(
    z_opt: &DepthImage,
    normals: &NormalImage,
    color: &ColorImage,
    k: &CameraIntrinsics,
    params: &DensifyParams,
) -> Result<DepthImage> {
    Ok(sparse_to_dense_steps(z_opt, normals, color, k, params)?.dense)
}

/// Like [`sparse_to_dense`] but returns every intermediate image.
pub fn sparse_to_dense_steps(
    z_opt: &DepthImage,
    normals: &NormalImage,
    color: &ColorImage,
    k: &CameraIntrinsics,
    params: &DensifyParams,
) -> Result<DensifySteps> {
    check_dims(z_opt.dims(), color.dims())?;
    let labels = superpixel_segment(color, &params.superpixel)?;
    sparse_to_dense_with_labels(z_opt, normals, color, k, params, labels)
}

/// Three-step reconstruction with a precomputed segmentation.
pub fn sparse_to_dense_with_labels(
    z_opt: &DepthImage,
    normals: &NormalImage,
    color: &ColorImage,
    k: &CameraIntrinsics,
    params: &DensifyParams,
    labels: SuperpixelLabels,
) -> Result<DensifySteps> {
    check_dims(z_opt.dims(), normals.dims())?;
    check_dims(z_opt.dims(), color.dims())?;
    check_dims(z_opt.dims(), labels.dims())?;
    if z_opt.valid_count() == 0 {
        return Err(Error::NoSeeds);
    }
    let segment_filled = normal_guided_filter(z_opt, normals, k, &params.filter, Some(&labels))?;
    let mut smoothed = segment_filled.clone();
    for _ in 0..params.filter.iterations.max(1) {
        smoothed = bilateral_depth_filter(&smoothed, color, &params.bilateral)?;
    }
    let dense = normal_guided_filter(&smoothed, normals, k, &params.filter, None)?;
    Ok(DensifySteps {
        labels,
        segment_filled,
        smoothed,
        dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn no_seeds_is_an_error() {
        let k = CameraIntrinsics::new(50.0, 50.0, 4.0, 4.0, 8, 8).unwrap();
        let z = DepthImage::invalid(8, 8);
        let n = NormalImage::constant(8, 8, Vector3::z());
        let c = ColorImage::constant(8, 8, [9, 9, 9]);
        assert!(matches!(
            sparse_to_dense(&z, &n, &c, &k, &DensifyParams::default()),
            Err(Error::NoSeeds)
        ));
    }

    #[test]
    fn dense_exact_plane_survives_all_steps() {
        let k = CameraIntrinsics::new(80.0, 80.0, 16.0, 12.0, 32, 24).unwrap();
        let z = DepthImage::constant(32, 24, 1.8);
        let n = NormalImage::constant(32, 24, Vector3::z());
        let c = ColorImage::constant(32, 24, [100, 150, 200]);
        let steps = sparse_to_dense_steps(&z, &n, &c, &k, &DensifyParams::default()).unwrap();
        for img in [&steps.segment_filled, &steps.smoothed, &steps.dense] {
            assert_eq!(img.valid_count(), 32 * 24);
            for v in img.values() {
                assert!((v - 1.8).abs() < 1e-9);
            }
        }
    }
}
