//! Warping optimized sparse points into a new keyframe and rescaling the
//! prior depth to agree with them.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{check_dims, CameraIntrinsics, DepthImage, Pose};

pub type KeyframeId = u32;

/// A sparse point whose depth was optimized in its host keyframe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaturePoint {
    pub host: KeyframeId,
    pub u: f64,
    pub v: f64,
    /// Optimized depth in the host frame (meters).
    pub z: f64,
    /// Largest baseline the point was observed from; its weight in the
    /// scale estimate.
    pub baseline_rel: f64,
}

/// Active keyframes with their poses relative to the new keyframe
/// (host-to-new) and the mature points they host.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActiveWindow {
    keyframes: Vec<(KeyframeId, Pose)>,
    points: Vec<MaturePoint>,
}

impl ActiveWindow {
    pub fn new(keyframes: Vec<(KeyframeId, Pose)>, points: Vec<MaturePoint>) -> Result<Self> {
        let mut ids = HashSet::new();
        for (id, _) in &keyframes {
            if !ids.insert(*id) {
                return Err(Error::invalid(format!("duplicate keyframe id {id}")));
            }
        }
        for (i, p) in points.iter().enumerate() {
            if !ids.contains(&p.host) {
                return Err(Error::invalid(format!(
                    "point {i} references unknown keyframe {}",
                    p.host
                )));
            }
            if !(p.z > 0.0 && p.z.is_finite()) {
                return Err(Error::invalid(format!("point {i} has non-positive depth {}", p.z)));
            }
            if !(p.baseline_rel >= 0.0 && p.baseline_rel.is_finite()) {
                return Err(Error::invalid(format!(
                    "point {i} has negative relative baseline {}",
                    p.baseline_rel
                )));
            }
        }
        Ok(Self { keyframes, points })
    }

    pub fn keyframes(&self) -> &[(KeyframeId, Pose)] {
        &self.keyframes
    }

    pub fn points(&self) -> &[MaturePoint] {
        &self.points
    }

    fn pose_of(&self, id: KeyframeId) -> &Pose {
        &self
            .keyframes
            .iter()
            .find(|(k, _)| *k == id)
            .expect("validated in ActiveWindow::new")
            .1
    }
}

/// A point that survived warping and the z-buffer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpedPoint {
    pub point_index: usize,
    pub x: usize,
    pub y: usize,
    /// Depth in the new keyframe.
    pub z_star: f64,
    pub baseline_rel: f64,
}

#[derive(Clone, Debug)]
pub struct WarpResult {
    /// Sparse depth image of the surviving points.
    pub depth: DepthImage,
    /// Surviving points in point-index order.
    pub points: Vec<WarpedPoint>,
    /// Points that left the image or landed behind the camera.
    pub dropped: usize,
    /// Points hidden behind a nearer point on the same pixel.
    pub occluded: usize,
}

/// Warps every mature point into the new keyframe: unproject in the host,
/// apply the host-to-new pose, project and round to the nearest pixel.
/// Collisions keep the smallest depth; equal depths keep the lower point
/// index.
pub fn warp_points(window: &ActiveWindow, k: &CameraIntrinsics) -> WarpResult {
    let (w, h) = k.dims();
    let mut owner: Vec<Option<WarpedPoint>> = vec![None; w * h];
    let mut dropped = 0;
    let mut occluded = 0;

    for (idx, p) in window.points.iter().enumerate() {
        let pose = window.pose_of(p.host);
        let v = pose.transform_point(&k.unproject_unchecked(p.u, p.v, p.z));
        let Ok((u, vv, z_star)) = k.project(&v) else {
            dropped += 1;
            continue;
        };
        let Some((x, y)) = k.pixel_of(u, vv) else {
            dropped += 1;
            continue;
        };
        let candidate = WarpedPoint {
            point_index: idx,
            x,
            y,
            z_star,
            baseline_rel: p.baseline_rel,
        };
        let slot = &mut owner[y * w + x];
        match slot {
            Some(existing) if existing.z_star <= z_star => occluded += 1,
            Some(_) => {
                occluded += 1;
                *slot = Some(candidate);
            }
            None => *slot = Some(candidate),
        }
    }

    let mut depth = DepthImage::invalid(w, h);
    let mut points: Vec<WarpedPoint> = owner.into_iter().flatten().collect();
    for p in &points {
        depth.set(p.x, p.y, Some(p.z_star));
    }
    points.sort_by_key(|p| p.point_index);
    WarpResult {
        depth,
        points,
        dropped,
        occluded,
    }
}

/// Scale-corrected prior depth and the factor applied.
#[derive(Clone, Debug)]
pub struct ScaleCorrection {
    pub depth: DepthImage,
    pub factor: f64,
    /// Points that contributed (valid prior at their pixel, positive baseline).
    pub used: usize,
}

/// Baseline-weighted mean of `z* / z_prior` over the evidence points.
///
/// `z_prior` is the prior depth at each point's pixel in the new keyframe.
/// Points on invalid prior pixels or with zero baseline do not contribute.
pub fn correction_factor(z_prior: &DepthImage, warped: &[WarpedPoint]) -> Result<(f64, usize)> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0;
    for p in warped {
        if p.x >= z_prior.width() || p.y >= z_prior.height() {
            return Err(Error::invalid(format!(
                "warped point at ({}, {}) outside the prior image",
                p.x, p.y
            )));
        }
        let Some(z) = z_prior.get(p.x, p.y) else { continue };
        if !(p.baseline_rel > 0.0) {
            continue;
        }
        num += p.baseline_rel * (p.z_star / z);
        den += p.baseline_rel;
        used += 1;
    }
    if used == 0 || !(den > 0.0) {
        return Err(Error::NoCorrectionEvidence);
    }
    Ok((num / den, used))
}

/// Multiplies every valid prior pixel by [`correction_factor`].
pub fn scale_correct(z_prior: &DepthImage, warped: &[WarpedPoint]) -> Result<ScaleCorrection> {
    let (factor, used) = correction_factor(z_prior, warped)?;
    Ok(ScaleCorrection {
        depth: z_prior.map_valid(|z| Some(z * factor)),
        factor,
        used,
    })
}

/// `z_cor` with every valid `z_opt` pixel written over it.
pub fn overlay_optimized(z_cor: &DepthImage, z_opt: &DepthImage) -> Result<DepthImage> {
    check_dims(z_cor.dims(), z_opt.dims())?;
    let mut out = z_cor.clone();
    for (x, y, z) in z_opt.iter_valid() {
        out.set(x, y, Some(z));
    }
    Ok(out)
}
