//! Camera model, image containers and the per-pixel depth/normal conversions.

mod camera;
mod depth;
mod image;
mod pose;

pub use camera::{CameraIntrinsics, Vertex};
pub use depth::{depth_to_disparity, depth_to_normal, disparity_to_depth, focal_adapt};
pub use image::{ColorImage, DepthImage, DisparityImage, NormalImage};
pub use pose::Pose;

pub(crate) use image::check_dims;
