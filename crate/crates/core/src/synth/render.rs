use nalgebra::Vector3;
use rayon::prelude::*;

use super::scene::PlanarScene;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, ColorImage, DepthImage, NormalImage, Pose};

/// Planes seen edge-on from the camera are skipped.
const EDGE_ON_EPS: f64 = 1e-12;

/// Ground-truth images of a scene from one camera pose.
#[derive(Clone, Debug)]
pub struct RenderedView {
    pub depth: DepthImage,
    /// Plane normals in the camera frame, oriented so that `n . V > 0`.
    pub normals: NormalImage,
    pub color: ColorImage,
    /// Index of the plane seen at each pixel.
    pub plane_ids: Vec<Option<usize>>,
}

struct CameraPlane {
    normal: Vector3<f64>,
    offset: f64,
}

/// Ray-casts `scene` from `pose` (camera-to-world). Pixels whose ray hits no
/// polygon are invalid; the nearest hit wins, lower plane index on ties.
pub fn render(scene: &PlanarScene, pose: &Pose, k: &CameraIntrinsics) -> Result<RenderedView> {
    k.validate()?;
    if !scene.extent.contains(pose.translation()) {
        return Err(Error::invalid("camera centre lies outside the scene extent"));
    }
    let rot = pose.rotation();
    let t = pose.translation();
    let planes: Vec<Option<CameraPlane>> = scene
        .planes
        .iter()
        .map(|p| {
            let mut normal = rot.transpose() * p.normal();
            let mut offset = p.offset() - p.normal().dot(t);
            if offset.abs() < EDGE_ON_EPS {
                return None;
            }
            if offset < 0.0 {
                normal = -normal;
                offset = -offset;
            }
            Some(CameraPlane { normal, offset })
        })
        .collect();

    let (w, h) = k.dims();
    let hits: Vec<Option<(usize, f64)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let ray = k.ray((i % w) as f64, (i / w) as f64);
            let mut best: Option<(usize, f64)> = None;
            for (pi, cp) in planes.iter().enumerate() {
                let Some(cp) = cp else { continue };
                let denom = cp.normal.dot(&ray);
                if denom <= 0.0 {
                    continue;
                }
                let z = cp.offset / denom;
                if !z.is_finite() || best.is_some_and(|(_, bz)| bz <= z) {
                    continue;
                }
                let world = pose.transform_point(&(ray * z));
                if scene.planes[pi].contains(&world) {
                    best = Some((pi, z));
                }
            }
            best
        })
        .collect();

    let mut depth = DepthImage::invalid(w, h);
    let mut normals = NormalImage::invalid(w, h);
    let mut color = ColorImage::constant(w, h, [0, 0, 0]);
    let mut plane_ids = vec![None; w * h];
    for (i, hit) in hits.into_iter().enumerate() {
        if let Some((pi, z)) = hit {
            depth.set_index(i, Some(z));
            let cp = planes[pi].as_ref().expect("hit plane is visible");
            normals.set_unit_index(i, cp.normal);
            color.set(i % w, i / w, scene.planes[pi].color());
            plane_ids[i] = Some(pi);
        }
    }
    Ok(RenderedView {
        depth,
        normals,
        color,
        plane_ids,
    })
}
