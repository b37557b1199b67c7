use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Maximum timestamp difference for two poses to be associated (seconds).
pub const ASSOCIATION_WINDOW: f64 = 0.02;

/// Timestamped camera poses (camera-to-world), strictly increasing in time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    entries: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new(entries: Vec<(f64, Pose)>) -> Result<Self> {
        for (i, w) in entries.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(format!(
                    "timestamps not strictly increasing at entry {} ({} after {})",
                    i + 1,
                    w[1].0,
                    w[0].0
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, Pose)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Applies `t * pose` to every entry.
    pub fn transformed(&self, t: &Pose) -> Self {
        Self {
            entries: self.entries.iter().map(|(s, p)| (*s, *t * *p)).collect(),
        }
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.entries.iter().map(|(_, p)| *p.translation()).collect()
    }

    /// Pose whose timestamp is closest to `t`, if within `window`.
    pub fn nearest(&self, t: f64, window: f64) -> Option<(usize, &Pose)> {
        let idx = self.entries.partition_point(|(s, _)| *s < t);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.entries.len())
            .map(|i| (i, (self.entries[i].0 - t).abs()))
            .filter(|&(_, d)| d <= window)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| (i, &self.entries[i].1))
    }
}

/// One-to-one association of two timestamp lists: candidate pairs within
/// `window` are accepted greedily by increasing time difference.
/// Returns `(index_a, index_b)` pairs sorted by `index_a`.
pub fn associate_timestamps(a: &[f64], b: &[f64], window: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, &ta) in a.iter().enumerate() {
        let lo = b.partition_point(|&tb| tb < ta - window);
        for (j, &tb) in b.iter().enumerate().skip(lo) {
            if tb > ta + window {
                break;
            }
            candidates.push(((ta - tb).abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AlignMode {
    /// Compare positions as given.
    None,
    /// Best rotation and translation.
    #[default]
    Rigid,
    /// Best rotation, translation and uniform scale.
    RigidScale,
}

/// Similarity transform `y = s R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Least-squares alignment of `src` onto `dst` (Umeyama's closed form).
pub fn align_points(src: &[Vector3<f64>], dst: &[Vector3<f64>], mode: AlignMode) -> Result<Alignment> {
    if src.len() != dst.len() || src.is_empty() {
        return Err(Error::invalid("alignment needs two equally sized non-empty point sets"));
    }
    if mode == AlignMode::None {
        return Ok(Alignment::identity());
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (sc, dc) = (s - mu_s, d - mu_d);
        cov += dc * sc.transpose();
        var_s += sc.norm_squared();
    }
    cov /= n;
    var_s /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical("SVD failed during trajectory alignment".into())),
    };
    let mut sign = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let scale = match mode {
        AlignMode::RigidScale => {
            if !(var_s > 0.0) {
                return Err(Error::Numerical("cannot estimate scale of a single point".into()));
            }
            (svd.singular_values.component_mul(&sign.diagonal())).sum() / var_s
        }
        _ => 1.0,
    };
    let translation = mu_d - scale * (rotation * mu_s);
    Ok(Alignment {
        rotation,
        translation,
        scale,
    })
}

/// Result of an absolute-trajectory-error evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct AteReport {
    pub rmse: f64,
    pub pairs: usize,
    pub alignment: Alignment,
}

/// Root-mean-square translational error between associated poses after
/// aligning the estimate onto the ground truth.
pub fn ate(est: &Trajectory, gt: &Trajectory, mode: AlignMode) -> Result<AteReport> {
    let ts_e: Vec<f64> = est.entries.iter().map(|e| e.0).collect();
    let ts_g: Vec<f64> = gt.entries.iter().map(|e| e.0).collect();
    let pairs = associate_timestamps(&ts_e, &ts_g, ASSOCIATION_WINDOW);
    if pairs.len() < 2 {
        return Err(Error::TooFewAssociations {
            found: pairs.len(),
            required: 2,
        });
    }
    let src: Vec<_> = pairs.iter().map(|&(i, _)| *est.entries[i].1.translation()).collect();
    let dst: Vec<_> = pairs.iter().map(|&(_, j)| *gt.entries[j].1.translation()).collect();
    let alignment = align_points(&src, &dst, mode)?;
    let sq: f64 = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (alignment.apply(s) - d).norm_squared())
        .sum();
    Ok(AteReport {
        rmse: (sq / pairs.len() as f64).sqrt(),
        pairs: pairs.len(),
        alignment,
    })
}

/// [`ate`] returning only the RMSE (meters).
pub fn ate_rmse(est: &Trajectory, gt: &Trajectory, mode: AlignMode) -> Result<f64> {
    Ok(ate(est, gt, mode)?.rmse)
}
