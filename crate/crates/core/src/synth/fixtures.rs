//! Canonical test scenes.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Vector3;

use super::scene::{Extent, PlanarScene, Plane};
use crate::geometry::{CameraIntrinsics, Pose};

pub const FIXTURE_NAMES: [&str; 3] = ["box_room", "desk_on_floor", "two_wall_crease"];

/// 320x240 pinhole camera used by every fixture.
pub fn fixture_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(250.0, 250.0, 159.5, 119.5, 320, 240).expect("valid fixture intrinsics")
}

pub fn fixture(name: &str) -> Option<PlanarScene> {
    match name {
        "box_room" => Some(box_room()),
        "desk_on_floor" => Some(desk_on_floor()),
        "two_wall_crease" => Some(two_wall_crease()),
        _ => None,
    }
}

fn rect(axis: usize, value: f64, lo: [f64; 2], hi: [f64; 2], color: [u8; 3]) -> Plane {
    Plane::axis_rect(axis, value, lo, hi, color).expect("valid fixture rectangle")
}

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

/// Closed room (camera y axis points down): back wall, two side walls,
/// floor and ceiling.
pub fn box_room() -> PlanarScene {
    let planes = vec![
        rect(2, 4.0, [-2.0, -1.5], [2.0, 1.5], [200, 190, 170]),
        rect(0, -2.0, [-1.5, -1.0], [1.5, 4.0], [60, 110, 180]),
        rect(0, 2.0, [-1.5, -1.0], [1.5, 4.0], [180, 70, 60]),
        rect(1, 1.5, [-1.0, -2.0], [4.0, 2.0], [90, 150, 80]),
        rect(1, -1.5, [-1.0, -2.0], [4.0, 2.0], [235, 235, 235]),
    ];
    let extent = Extent::new(v(-2.0, -1.5, -1.0), v(2.0, 1.5, 4.0)).expect("valid extent");
    PlanarScene::new(planes, extent, Pose::identity()).expect("valid fixture")
}

/// A desk standing on the floor: the desk top is parallel to the floor one
/// level up, with a vertical front face, viewed from above and in front.
pub fn desk_on_floor() -> PlanarScene {
    let planes = vec![
        rect(1, 1.0, [-1.0, -6.0], [6.0, 6.0], [120, 120, 130]),
        rect(1, 0.25, [1.2, -0.5], [2.0, 0.5], [150, 90, 40]),
        rect(2, 1.2, [-0.5, 0.25], [0.5, 1.0], [90, 50, 20]),
        rect(2, 6.0, [-6.0, -2.0], [6.0, 1.0], [210, 210, 190]),
    ];
    let extent = Extent::new(v(-6.0, -2.0, -1.0), v(6.0, 1.0, 6.0)).expect("valid extent");
    let pitch_down = -30f64.to_radians();
    let viewpoint = Pose::from_axis_angle(Vector3::x(), pitch_down, Vector3::zeros());
    PlanarScene::new(planes, extent, viewpoint).expect("valid fixture")
}

/// Two perpendicular walls meeting in a vertical concave crease straight
/// ahead of the camera.
pub fn two_wall_crease() -> PlanarScene {
    let h = FRAC_1_SQRT_2;
    let left = Plane::new(
        v(h, 0.0, -h),
        -3.0 * h,
        vec![v(-2.5, -2.0, 0.5), v(0.0, -2.0, 3.0), v(0.0, 2.0, 3.0), v(-2.5, 2.0, 0.5)],
        [70, 130, 200],
    )
    .expect("valid fixture plane");
    let right = Plane::new(
        v(h, 0.0, h),
        3.0 * h,
        vec![v(0.0, -2.0, 3.0), v(2.5, -2.0, 0.5), v(2.5, 2.0, 0.5), v(0.0, 2.0, 3.0)],
        [210, 160, 60],
    )
    .expect("valid fixture plane");
    let extent = Extent::new(v(-3.0, -2.5, -0.5), v(3.0, 2.5, 3.5)).expect("valid extent");
    PlanarScene::new(vec![left, right], extent, Pose::identity()).expect("valid fixture")
}
