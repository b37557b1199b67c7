use nalgebra::Vector3;

use crate::error::{Error, Result};

/// A 3D point in a camera frame (meters).
pub type Vertex = Vector3<f64>;

/// Pinhole camera model without distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fx.is_finite() && self.fy > 0.0 && self.fy.is_finite()) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid(format!(
                "cx = {} outside (0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(format!(
                "cy = {} outside (0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Back-projects pixel `(u, v)` at depth `z` into the camera frame.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Result<Vertex> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::invalid(format!("depth must be positive, got {z}")));
        }
        Ok(self.unproject_unchecked(u, v, z))
    }

    #[inline]
    pub(crate) fn unproject_unchecked(&self, u: f64, v: f64, z: f64) -> Vertex {
        Vector3::new(z * (u - self.cx) / self.fx, z * (v - self.cy) / self.fy, z)
    }

    /// Projects a camera-frame point to continuous pixel coordinates plus depth.
    pub fn project(&self, p: &Vertex) -> Result<(f64, f64, f64)> {
        if !(p.z > 0.0) {
            return Err(Error::BehindCamera(p.z));
        }
        Ok((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    /// Direction of the viewing ray through `(u, v)`, scaled so its z component is 1.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Nearest pixel for a continuous image position, `None` when outside the image.
    /// Ties round half away from zero.
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let (x, y) = (u.round(), v.round());
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn k500() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 160.0, 120.0, 320, 240).unwrap()
    }

    #[test]
    fn unproject_examples() {
        let k = k500();
        assert_eq!(k.unproject(160.0, 120.0, 2.0).unwrap(), Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(k.unproject(660.0, 120.0, 1.0).unwrap(), Vector3::new(1.0, 0.0, 1.0));

        let tum = CameraIntrinsics::new(535.4, 539.2, 320.1, 247.6, 640, 480).unwrap();
        let p = tum.unproject(400.0, 300.0, 1.5).unwrap();
        // 1.5 * 79.9 / 535.4 and 1.5 * 52.4 / 539.2, evaluated separately.
        let ex = 1.5 * 79.9 / 535.4;
        let ey = 1.5 * 52.4 / 539.2;
        assert_abs_diff_eq!(p.x, ex, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, ey, epsilon = 1e-12);
        assert_abs_diff_eq!(p.x, 0.223851326, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 0.145771513, epsilon = 1e-9);
        assert_eq!(p.z, 1.5);
    }

    #[test]
    fn unproject_rejects_bad_depth() {
        let k = k500();
        assert!(matches!(k.unproject(1.0, 1.0, 0.0), Err(Error::InvalidInput(_))));
        assert!(k.unproject(1.0, 1.0, -1.0).is_err());
        assert!(k.unproject(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn project_examples() {
        let k = k500();
        assert_eq!(k.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap(), (160.0, 120.0, 1.0));
        let (u, v, z) = k.project(&Vector3::new(0.5, -0.25, 2.0)).unwrap();
        assert_abs_diff_eq!(u, 285.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 57.5, epsilon = 1e-12);
        assert_eq!(z, 2.0);
        assert!(matches!(
            k.project(&Vector3::new(0.0, 0.0, 0.0)),
            Err(Error::BehindCamera(_))
        ));
        assert!(k.project(&Vector3::new(0.0, 0.0, -3.0)).is_err());
    }

    #[test]
    fn round_trip_example() {
        let k = k500();
        let p = k.unproject(231.5, 88.25, 3.7).unwrap();
        let (u, v, z) = k.project(&p).unwrap();
        assert_abs_diff_eq!(u, 231.5, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 88.25, epsilon = 1e-9);
        assert_abs_diff_eq!(z, 3.7, epsilon = 1e-9);
    }

    #[test]
    fn intrinsics_invariants() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 0.0, 4, 4).is_err());
    }

    #[test]
    fn pixel_rounding_half_away_from_zero() {
        let k = k500();
        assert_eq!(k.pixel_of(2.5, 3.5), Some((3, 4)));
        assert_eq!(k.pixel_of(2.4999, 0.0), Some((2, 0)));
        assert_eq!(k.pixel_of(-0.4, 0.0), Some((0, 0)));
        assert_eq!(k.pixel_of(-0.5, 0.0), None);
        assert_eq!(k.pixel_of(319.49, 239.49), Some((319, 239)));
        assert_eq!(k.pixel_of(319.5, 0.0), None);
    }

    proptest! {
        #[test]
        fn project_inverts_unproject(u in -100.0..400.0f64, v in -100.0..300.0f64, z in 0.05..50.0f64) {
            let k = CameraIntrinsics::new(535.4, 539.2, 320.1, 247.6, 640, 480).unwrap();
            let (pu, pv, pz) = k.project(&k.unproject(u, v, z).unwrap()).unwrap();
            prop_assert!((pu - u).abs() < 1e-9);
            prop_assert!((pv - v).abs() < 1e-9);
            prop_assert!((pz - z).abs() < 1e-9);
        }
    }
}
