//! Depth, disparity and normal conversions.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::camera::CameraIntrinsics;
use super::image::{check_dims, DepthImage, DisparityImage, NormalImage};
use crate::error::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Rescales a depth map predicted for a training camera to a test camera:
/// `z' = z * f_test / f_train`.
pub fn focal_adapt(z: &DepthImage, f_train: f64, f_test: f64) -> Result<DepthImage> {
    check_positive("f_train", f_train)?;
    check_positive("f_test", f_test)?;
    let ratio = f_test / f_train;
    Ok(z.map_valid(|v| Some(v * ratio)))
}

/// `z = B * f_train / d`. Pixels with non-positive disparity come out invalid.
pub fn disparity_to_depth(d: &DisparityImage, f_train: f64, baseline: f64) -> Result<DepthImage> {
    check_positive("f_train", f_train)?;
    check_positive("baseline", baseline)?;
    let bf = baseline * f_train;
    let mut out = DepthImage::invalid(d.width(), d.height());
    for i in 0..d.len() {
        if let Some(dv) = d.get_index(i) {
            out.set_index(i, Some(bf / dv));
        }
    }
    Ok(out)
}

/// `d = B * f_train / z`, the inverse of [`disparity_to_depth`].
pub fn depth_to_disparity(z: &DepthImage, f_train: f64, baseline: f64) -> Result<DisparityImage> {
    check_positive("f_train", f_train)?;
    check_positive("baseline", baseline)?;
    let bf = baseline * f_train;
    let mut out = DisparityImage::invalid(z.width(), z.height());
    for i in 0..z.len() {
        if let Some(zv) = z.get_index(i) {
            out.set_index(i, Some(bf / zv));
        }
    }
    Ok(out)
}

/// Normal of the surface through the pixel's back-projected vertex, from the
/// cross product of forward differences:
///
/// `n(u, v) = normalize((V(u+1, v) - V(u, v)) x (V(u, v+1) - V(u, v)))`
///
/// Fronto-parallel surfaces get `(0, 0, 1)`. The last row and column, pixels
/// whose stencil touches an invalid depth, and degenerate cross products are
/// invalid.
pub fn depth_to_normal(z: &DepthImage, k: &CameraIntrinsics) -> Result<NormalImage> {
    let (w, h) = z.dims();
    if w < 2 || h < 2 {
        return Err(Error::invalid(format!(
            "depth_to_normal needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    check_dims(k.dims(), z.dims())?;

    let normals: Vec<Option<Vector3<f64>>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if x + 1 >= w || y + 1 >= h {
                return None;
            }
            let z0 = z.get_index(i)?;
            let zr = z.get_index(i + 1)?;
            let zd = z.get_index(i + w)?;
            let (u, v) = (x as f64, y as f64);
            let v0 = k.unproject_unchecked(u, v, z0);
            let vr = k.unproject_unchecked(u + 1.0, v, zr);
            let vd = k.unproject_unchecked(u, v + 1.0, zd);
            let c = (vr - v0).cross(&(vd - v0));
            let norm = c.norm();
            (norm >= 1e-12 && norm.is_finite()).then(|| c / norm)
        })
        .collect();

    let mut out = NormalImage::invalid(w, h);
    for (i, n) in normals.into_iter().enumerate() {
        if let Some(n) = n {
            out.set_unit_index(i, n);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k500(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    }

    #[test]
    fn focal_adapt_examples() {
        let z = DepthImage::constant(4, 3, 2.0);
        assert_eq!(focal_adapt(&z, 500.0, 500.0).unwrap(), z);
        let half = focal_adapt(&z, 500.0, 250.0).unwrap();
        assert!(half.values().iter().all(|&v| v == 1.0));

        let mut mixed = DepthImage::constant(3, 3, 1.0);
        mixed.set(1, 1, None);
        mixed.set(0, 2, None);
        let out = focal_adapt(&mixed, 500.0, 600.0).unwrap();
        assert_eq!(out.mask(), mixed.mask());
        for (x, y, v) in out.iter_valid() {
            assert!((v - 1.2 * mixed.get(x, y).unwrap()).abs() < 1e-15);
        }
        assert!(focal_adapt(&z, 0.0, 1.0).is_err());
        assert!(focal_adapt(&z, 1.0, -1.0).is_err());
    }

    #[test]
    fn disparity_examples() {
        let d = DisparityImage::from_values(3, 1, vec![50.0, 25.0, 0.0]).unwrap();
        let z = disparity_to_depth(&d, 500.0, 0.1).unwrap();
        assert_eq!(z.get(0, 0), Some(1.0));
        assert_eq!(z.get(1, 0), Some(2.0));
        assert_eq!(z.get(2, 0), None);

        let z = DepthImage::from_values(2, 1, vec![1.0, 0.0]).unwrap();
        let d = depth_to_disparity(&z, 500.0, 0.1).unwrap();
        assert_eq!(d.get(0, 0), Some(50.0));
        assert_eq!(d.get(1, 0), None);
        assert!(depth_to_disparity(&z, 500.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn disparity_round_trip(vals in proptest::collection::vec(0.1f64..200.0, 12), f in 100.0f64..1000.0, b in 0.01f64..1.0) {
            let d = DisparityImage::from_values(4, 3, vals).unwrap();
            let back = depth_to_disparity(&disparity_to_depth(&d, f, b).unwrap(), f, b).unwrap();
            for i in 0..12 {
                let (a, b) = (d.get_index(i).unwrap(), back.get_index(i).unwrap());
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }

        #[test]
        fn focal_identity_is_bitwise(vals in proptest::collection::vec(0.0f64..20.0, 9), f in 1.0f64..2000.0) {
            let z = DepthImage::from_values(3, 3, vals).unwrap();
            prop_assert_eq!(focal_adapt(&z, f, f).unwrap(), z);
        }
    }

    #[test]
    fn fronto_parallel_normals() {
        let k = k500(8, 6);
        let n = depth_to_normal(&DepthImage::constant(8, 6, 3.0), &k).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                match n.get(x, y) {
                    Some(v) => {
                        assert!(x < 7 && y < 5);
                        assert!((v - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
                    }
                    None => assert!(x == 7 || y == 5),
                }
            }
        }
    }

    #[test]
    fn invalid_pixel_invalidates_its_stencil_users() {
        let k = k500(6, 6);
        let mut z = DepthImage::constant(6, 6, 2.0);
        z.set(3, 2, None);
        let n = depth_to_normal(&z, &k).unwrap();
        let full = depth_to_normal(&DepthImage::constant(6, 6, 2.0), &k).unwrap();
        let mut lost = Vec::new();
        for y in 0..6 {
            for x in 0..6 {
                if full.get(x, y).is_some() && n.get(x, y).is_none() {
                    lost.push((x, y));
                }
            }
        }
        lost.sort();
        assert_eq!(lost, vec![(2, 2), (3, 1), (3, 2)]);
    }

    #[test]
    fn too_small_image_is_rejected() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.5, 0.5, 1, 1).unwrap();
        assert!(depth_to_normal(&DepthImage::constant(1, 1, 1.0), &k).is_err());
    }
}
