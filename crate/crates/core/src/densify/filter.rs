use nalgebra::Vector3;
use rayon::prelude::*;

use super::superpixel::SuperpixelLabels;
use crate::error::{Error, Result};
use crate::geometry::{check_dims, CameraIntrinsics, DepthImage, NormalImage, Vertex};

/// Below this the viewing ray is treated as parallel to the source's tangent plane.
pub const PARALLEL_EPS: f64 = 1e-9;

/// Parameters of the coplanarity-weighted depth filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    /// Minimum normal inner product for a neighbor to count as coplanar.
    pub psi: f64,
    /// Window bound: a source `j` is considered when `|u_i - u_j| < sigma`
    /// and `|v_i - v_j| < sigma`.
    pub sigma: usize,
    /// How many times each filtering step is applied.
    pub iterations: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            psi: 0.95,
            sigma: 5,
            iterations: 1,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..1.0).contains(&self.psi) {
            return Err(Error::invalid(format!("psi = {} outside [-1, 1)", self.psi)));
        }
        if self.sigma < 1 {
            return Err(Error::invalid("sigma must be at least 1"));
        }
        Ok(())
    }
}

/// Depth at pixel `target` of the tangent plane through `source` with normal
/// `normal`, i.e. where the target's viewing ray meets that plane.
///
/// Returns `None` when the ray is (nearly) parallel to the plane.
pub fn coplanar_reproject(
    k: &CameraIntrinsics,
    target: (f64, f64),
    source: &Vertex,
    normal: &Vector3<f64>,
) -> Option<f64> {
    let num = normal.x * source.x + normal.y * source.y + normal.z * source.z;
    let den = (target.0 - k.cx) * normal.x / k.fx + (target.1 - k.cy) * normal.y / k.fy + normal.z;
    if den.abs() < PARALLEL_EPS {
        return None;
    }
    Some(num / den)
}

#[derive(Clone, Copy)]
struct Source {
    x: usize,
    y: usize,
    vertex: Vertex,
    normal: Vector3<f64>,
}

/// Weighted coplanar reprojection for one output pixel. Sources are visited
/// in the order given (raster order), which fixes the summation order.
#[inline]
fn fuse_sources<'a>(
    k: &CameraIntrinsics,
    target: (usize, usize),
    normal: &Vector3<f64>,
    psi: f64,
    sources: impl Iterator<Item = &'a Source>,
) -> Option<f64> {
    let t = (target.0 as f64, target.1 as f64);
    let mut num = 0.0;
    let mut den = 0.0;
    for s in sources {
        let w = s.normal.dot(normal);
        if w <= psi {
            continue;
        }
        match coplanar_reproject(k, t, &s.vertex, &s.normal) {
            Some(z) if z > 0.0 && z.is_finite() => {
                num += w * z;
                den += w;
            }
            _ => {}
        }
    }
    (den > 0.0).then(|| num / den)
}

fn collect_sources(z: &DepthImage, n: &NormalImage, k: &CameraIntrinsics) -> Vec<Option<Source>> {
    let w = z.width();
    (0..z.len())
        .map(|i| {
            let depth = z.get_index(i)?;
            let normal = n.get_index(i)?;
            let (x, y) = (i % w, i / w);
            Some(Source {
                x,
                y,
                vertex: k.unproject_unchecked(x as f64, y as f64, depth),
                normal,
            })
        })
        .collect()
}

fn filter_once(
    z: &DepthImage,
    n: &NormalImage,
    k: &CameraIntrinsics,
    params: &FilterParams,
    labels: Option<&SuperpixelLabels>,
) -> DepthImage {
    let (w, h) = z.dims();
    let sources = collect_sources(z, n, k);
    let psi = params.psi;

    let out: Vec<Option<f64>> = match labels {
        None => {
            let r = params.sigma as isize - 1;
            (0..w * h)
                .into_par_iter()
                .map(|i| {
                    let Some(normal) = n.get_index(i) else {
                        return z.get_index(i);
                    };
                    let (x, y) = ((i % w) as isize, (i / w) as isize);
                    let x0 = (x - r).max(0) as usize;
                    let x1 = (x + r).min(w as isize - 1) as usize;
                    let y0 = (y - r).max(0) as usize;
                    let y1 = (y + r).min(h as isize - 1) as usize;
                    let window = (y0..=y1)
                        .flat_map(|yy| (x0..=x1).map(move |xx| yy * w + xx))
                        .filter_map(|j| sources[j].as_ref());
                    fuse_sources(k, (i % w, i / w), &normal, psi, window)
                })
                .collect()
        }
        Some(labels) => {
            // Raster-ordered sources per superpixel; a superpixel's members all
            // lie inside its bounding box, so this is the box search restricted
            // to same-label pixels.
            let mut per_label: Vec<Vec<Source>> = vec![Vec::new(); labels.count()];
            for s in sources.iter().flatten() {
                per_label[labels.get(s.x, s.y) as usize].push(*s);
            }
            (0..w * h)
                .into_par_iter()
                .map(|i| {
                    let Some(normal) = n.get_index(i) else {
                        return z.get_index(i);
                    };
                    let label = labels.get_index(i) as usize;
                    fuse_sources(k, (i % w, i / w), &normal, psi, per_label[label].iter())
                })
                .collect()
        }
    };
    DepthImage::from_options(w, h, out)
}

/// Normal-guided depth filter.
///
/// Every pixel with a valid normal is recomputed as the normal-weighted mean
/// of the depths reprojected onto its ray from admissible sources `j`:
/// valid depth and normal, `n_j . n_i > psi`, and either inside the spatial
/// window (`labels == None`) or carrying the same superpixel label as `i`
/// (`labels == Some`). A pixel with a valid depth is its own source. Pixels
/// without a normal keep their input value; pixels with no admissible
/// source stay invalid.
pub fn normal_guided_filter(
    z: &DepthImage,
    n: &NormalImage,
    k: &CameraIntrinsics,
    params: &FilterParams,
    labels: Option<&SuperpixelLabels>,
) -> Result<DepthImage> {
    params.validate()?;
    check_dims(z.dims(), n.dims())?;
    check_dims(z.dims(), k.dims())?;
    if let Some(l) = labels {
        check_dims(z.dims(), l.dims())?;
    }
    let mut current = filter_once(z, n, k, params, labels);
    for _ in 1..params.iterations {
        current = filter_once(&current, n, k, params, labels);
    }
    Ok(current)
}
