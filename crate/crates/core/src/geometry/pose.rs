use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-9;

/// Rigid transform `x' = R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho <= ORTHO_TOL && (det - 1.0).abs() <= ORTHO_TOL) {
            return Err(Error::invalid(format!(
                "not a rotation matrix (|RtR - I| = {ortho:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite translation"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let rotation = match Unit::try_new(axis, 1e-15) {
            Some(axis) => *Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        Self {
            rotation,
            translation: t,
        }
    }

    pub fn from_unit_quaternion(q: &UnitQuaternion<f64>, t: Vector3<f64>) -> Self {
        Self {
            rotation: *q.to_rotation_matrix().matrix(),
            translation: t,
        }
    }

    /// Builds a pose from the 12 entries of a row-major `[R | t]` block.
    pub fn from_row_major_3x4(m: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vector3::new(m[3], m[7], m[11]))
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

impl Mul for Pose {
    type Output = Pose;

    /// `(a * b).transform_point(p) == a.transform_point(&b.transform_point(p))`
    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_rotations() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Pose::new(m, Vector3::zeros()).is_err());
        let m = Matrix3::identity() * 1.001;
        assert!(Pose::new(m, Vector3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity(), Vector3::zeros()).is_ok());
    }

    #[test]
    fn inverse_and_composition() {
        let a = Pose::from_axis_angle(Vector3::new(0.3, -1.0, 0.2), 0.7, Vector3::new(1.0, 2.0, -0.5));
        let p = Vector3::new(0.4, -0.1, 2.2);
        let back = a.inverse().transform_point(&a.transform_point(&p));
        assert!((back - p).norm() < 1e-12);
        let b = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let ab = a * b;
        assert!((ab.transform_point(&p) - a.transform_point(&b.transform_point(&p))).norm() < 1e-12);
    }

    #[test]
    fn row_major_round_trip() {
        let a = Pose::from_axis_angle(Vector3::new(1.0, 1.0, 0.0), -0.4, Vector3::new(3.0, 2.0, 1.0));
        let b = Pose::from_row_major_3x4(&a.to_row_major_3x4()).unwrap();
        assert_eq!(a, b);
    }
}
