//! Keyframe-wise Bayesian refinement of dense depth.
//!
//! Each pixel carries a Gaussian over inverse depth combined with a Beta
//! distribution over the probability that a measurement is an inlier; outliers
//! are uniform over the scene's inverse-depth range. An observation turns the
//! product into a four-term mixture, which is projected back onto the
//! Gaussian x Beta family by matching the first two moments of the inverse
//! depth and of the inlier ratio.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{check_dims, CameraIntrinsics, DepthImage, Pose};

/// Beta pseudo-counts every belief starts from.
pub const INITIAL_BETA_COUNT: f64 = 10.0;

/// Relative widening of the valid depth range used as the outlier support.
pub const RANGE_MARGIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelDepthBelief {
    /// Mean inverse depth (1/m).
    pub mu: f64,
    /// Variance of the inverse depth (1/m^2).
    pub sigma2: f64,
    /// Inlier pseudo-count.
    pub a: f64,
    /// Outlier pseudo-count.
    pub b: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub valid: bool,
}

impl PixelDepthBelief {
    pub fn invalid() -> Self {
        Self {
            mu: 0.0,
            sigma2: 0.0,
            a: 0.0,
            b: 0.0,
            z_min: 0.0,
            z_max: 0.0,
            valid: false,
        }
    }

    pub fn inlier_ratio(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn depth(&self) -> f64 {
        1.0 / self.mu
    }

    /// Density of the outlier component over inverse depth.
    pub fn outlier_density(&self) -> f64 {
        1.0 / (1.0 / self.z_min - 1.0 / self.z_max)
    }
}

/// Whether observations may be outliers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutlierModel {
    /// Gaussian inlier plus uniform outlier mixture.
    #[default]
    Mixture,
    /// Every observation is an inlier (plain precision-weighted fusion).
    GaussianOnly,
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Fuses one inverse-depth observation into a belief.
pub fn fuse_observation(
    belief: &PixelDepthBelief,
    obs_mu: f64,
    obs_sigma2: f64,
    model: OutlierModel,
) -> PixelDepthBelief {
    if !belief.valid {
        return *belief;
    }
    if !(obs_mu.is_finite() && obs_sigma2.is_finite() && obs_sigma2 > 0.0) {
        return PixelDepthBelief {
            b: belief.b + 1.0,
            ..*belief
        };
    }

    let PixelDepthBelief { mu, sigma2, a, b, .. } = *belief;
    let s2 = 1.0 / (1.0 / sigma2 + 1.0 / obs_sigma2);
    let m = s2 * (mu / sigma2 + obs_mu / obs_sigma2);

    if model == OutlierModel::GaussianOnly {
        return PixelDepthBelief {
            mu: m,
            sigma2: s2,
            a: a + 1.0,
            ..*belief
        };
    }

    let inlier = a / (a + b) * normal_pdf(obs_mu, mu, sigma2 + obs_sigma2);
    let outlier = b / (a + b) * belief.outlier_density();
    let norm = inlier + outlier;
    let (c1, c2) = (inlier / norm, outlier / norm);

    let ab1 = a + b + 1.0;
    let ab2 = a + b + 2.0;
    let f = c1 * (a + 1.0) / ab1 + c2 * a / ab1;
    let e = c1 * (a + 1.0) * (a + 2.0) / (ab1 * ab2) + c2 * a * (a + 1.0) / (ab1 * ab2);

    let mu_new = c1 * m + c2 * mu;
    let sigma2_new = c1 * s2 + c2 * sigma2 + c1 * c2 * (m - mu).powi(2);
    let a_new = (e - f) / (f - e / f);
    let b_new = a_new * (1.0 - f) / f;

    PixelDepthBelief {
        mu: mu_new,
        sigma2: sigma2_new,
        a: a_new,
        b: b_new,
        ..*belief
    }
}

/// Per-pixel beliefs of one keyframe.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefMap {
    width: usize,
    height: usize,
    beliefs: Vec<PixelDepthBelief>,
}

impl BeliefMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> &PixelDepthBelief {
        &self.beliefs[y * self.width + x]
    }

    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut PixelDepthBelief {
        &mut self.beliefs[y * self.width + x]
    }

    pub fn beliefs(&self) -> &[PixelDepthBelief] {
        &self.beliefs
    }

    pub fn valid_count(&self) -> usize {
        self.beliefs.iter().filter(|b| b.valid).count()
    }

    /// Mean depth of every valid belief.
    pub fn mean_depth(&self) -> DepthImage {
        DepthImage::from_options(
            self.width,
            self.height,
            self.beliefs.iter().map(|b| b.valid.then(|| b.depth())).collect(),
        )
    }

    /// Writes a `u32` width and height followed by six little-endian `f32`
    /// per pixel in row-major order: mu, sigma2, a, b, z_min, z_max.
    /// Invalid pixels are written as six zeros.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(8 + self.beliefs.len() * 24);
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        for b in &self.beliefs {
            let vals = if b.valid {
                [b.mu, b.sigma2, b.a, b.b, b.z_min, b.z_max]
            } else {
                [0.0; 6]
            };
            for v in vals {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<belief map>", e))?;
        if bytes.len() < 8 {
            return Err(Error::invalid("belief map header truncated"));
        }
        let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let expected = 8 + width * height * 24;
        if bytes.len() != expected {
            return Err(Error::invalid(format!(
                "belief map of {width}x{height} needs {expected} bytes, got {}",
                bytes.len()
            )));
        }
        let beliefs = bytes[8..]
            .chunks_exact(24)
            .map(|chunk| {
                let v: Vec<f64> = chunk
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                    .collect();
                if v[1] > 0.0 {
                    PixelDepthBelief {
                        mu: v[0],
                        sigma2: v[1],
                        a: v[2],
                        b: v[3],
                        z_min: v[4],
                        z_max: v[5],
                        valid: true,
                    }
                } else {
                    PixelDepthBelief::invalid()
                }
            })
            .collect();
        Ok(Self {
            width,
            height,
            beliefs,
        })
    }
}

/// Initial beliefs from the dense reconstruction and the scale-corrected prior.
///
/// The inverse-depth spread is the disagreement `|1/z_dense - 1/z_cor|`,
/// floored at `sigma_floor`. Where `z_cor` has no value, a quarter of the
/// inverse-depth support is used instead.
pub fn init_beliefs(z_dense: &DepthImage, z_cor: &DepthImage, sigma_floor: f64) -> Result<BeliefMap> {
    check_dims(z_dense.dims(), z_cor.dims())?;
    if !(sigma_floor > 0.0 && sigma_floor.is_finite()) {
        return Err(Error::invalid(format!("sigma floor must be positive, got {sigma_floor}")));
    }
    let (lo, hi) = z_dense
        .iter_valid()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, _, z)| (lo.min(z), hi.max(z)));
    let z_min = lo * (1.0 - RANGE_MARGIN);
    let z_max = hi * (1.0 + RANGE_MARGIN);
    let fallback_sigma = (1.0 / z_min - 1.0 / z_max) / 4.0;

    let beliefs = (0..z_dense.len())
        .map(|i| {
            let Some(zd) = z_dense.get_index(i) else {
                return PixelDepthBelief::invalid();
            };
            let mu = 1.0 / zd;
            let spread = match z_cor.get_index(i) {
                Some(zc) => (mu - 1.0 / zc).abs(),
                None => fallback_sigma,
            };
            let sigma = spread.max(sigma_floor);
            PixelDepthBelief {
                mu,
                sigma2: sigma * sigma,
                a: INITIAL_BETA_COUNT,
                b: INITIAL_BETA_COUNT,
                z_min,
                z_max,
                valid: true,
            }
        })
        .collect();
    Ok(BeliefMap {
        width: z_dense.width(),
        height: z_dense.height(),
        beliefs,
    })
}

/// Warps every valid pixel of another keyframe's depth into this keyframe
/// and fuses it at the pixel it lands on. When several pixels land on the
/// same target the nearest one is used (ties: first in raster order).
pub fn observe_from_keyframe(
    beliefs: &BeliefMap,
    z_other: &DepthImage,
    pose_other_to_this: &Pose,
    k: &CameraIntrinsics,
    obs_sigma2: f64,
    model: OutlierModel,
) -> Result<BeliefMap> {
    check_dims(beliefs.dims(), z_other.dims())?;
    check_dims(beliefs.dims(), k.dims())?;
    if !(obs_sigma2 > 0.0 && obs_sigma2.is_finite()) {
        return Err(Error::invalid(format!("observation variance must be positive, got {obs_sigma2}")));
    }
    let mut landing: Vec<Option<f64>> = vec![None; beliefs.beliefs.len()];
    for (x, y, z) in z_other.iter_valid() {
        let p = pose_other_to_this.transform_point(&k.unproject_unchecked(x as f64, y as f64, z));
        let Ok((u, v, z_star)) = k.project(&p) else { continue };
        let Some((tx, ty)) = k.pixel_of(u, v) else { continue };
        let slot = &mut landing[ty * beliefs.width + tx];
        if slot.is_none_or(|cur| z_star < cur) {
            *slot = Some(z_star);
        }
    }
    let updated = beliefs
        .beliefs
        .par_iter()
        .zip(landing.par_iter())
        .map(|(b, obs)| match obs {
            Some(z) => fuse_observation(b, 1.0 / z, obs_sigma2, model),
            None => *b,
        })
        .collect();
    Ok(BeliefMap {
        width: beliefs.width,
        height: beliefs.height,
        beliefs: updated,
    })
}

/// Refined depth plus the pixels rejected as outliers.
#[derive(Clone, Debug)]
pub struct RefinedDepth {
    pub depth: DepthImage,
    /// Valid beliefs that failed the inlier-ratio or uncertainty gate.
    pub outliers: Vec<bool>,
}

/// Emits `1/mu` where `a/(a+b) >= min_inlier_ratio` and
/// `sqrt(sigma2) <= max_sigma`.
pub fn extract_refined(beliefs: &BeliefMap, min_inlier_ratio: f64, max_sigma: f64) -> RefinedDepth {
    let mut depth = DepthImage::invalid(beliefs.width, beliefs.height);
    let mut outliers = vec![false; beliefs.beliefs.len()];
    for (i, b) in beliefs.beliefs.iter().enumerate() {
        if !b.valid {
            continue;
        }
        if b.inlier_ratio() >= min_inlier_ratio && b.sigma2.sqrt() <= max_sigma {
            depth.set_index(i, Some(b.depth()));
        } else {
            outliers[i] = true;
        }
    }
    RefinedDepth { depth, outliers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn belief(mu: f64, sigma2: f64) -> PixelDepthBelief {
        PixelDepthBelief {
            mu,
            sigma2,
            a: 10.0,
            b: 10.0,
            z_min: 0.5,
            z_max: 10.0,
            valid: true,
        }
    }

    #[test]
    fn gaussian_limit_examples() {
        let b = belief(0.5, 0.04);
        let f = fuse_observation(&b, 0.5, 0.04, OutlierModel::GaussianOnly);
        assert!((f.mu - 0.5).abs() < 1e-15 && (f.sigma2 - 0.02).abs() < 1e-15);
        assert_eq!(f.a, 11.0);
        let f = fuse_observation(&b, 1.0, 0.04, OutlierModel::GaussianOnly);
        assert!((f.mu - 0.75).abs() < 1e-15);
    }

    #[test]
    fn non_finite_observation_counts_as_outlier() {
        let b = belief(0.5, 0.04);
        for obs in [f64::NAN, f64::INFINITY] {
            let f = fuse_observation(&b, obs, 0.04, OutlierModel::Mixture);
            assert_eq!(f.mu, b.mu);
            assert_eq!(f.sigma2, b.sigma2);
            assert_eq!(f.b, b.b + 1.0);
        }
    }

    #[test]
    fn mixture_rejects_far_outlier() {
        let b = belief(0.5, 0.0004);
        let f = fuse_observation(&b, 1.8, 0.0004, OutlierModel::Mixture);
        assert!((f.mu - 0.5).abs() < 1e-9);
        assert!(f.inlier_ratio() < b.inlier_ratio());
        let g = fuse_observation(&b, 0.5, 0.0004, OutlierModel::Mixture);
        assert!(g.inlier_ratio() > b.inlier_ratio());
        assert!(g.sigma2 < b.sigma2);
    }

    #[test]
    fn repeated_true_observations_converge() {
        let mut b = belief(0.45, 0.01);
        let mut last_ratio = b.inlier_ratio();
        for _ in 0..200 {
            b = fuse_observation(&b, 0.5, 0.01, OutlierModel::Mixture);
            assert!(b.inlier_ratio() >= last_ratio - 1e-12);
            last_ratio = b.inlier_ratio();
        }
        assert!(b.inlier_ratio() > 0.9);
        assert!((b.mu - 0.5).abs() < 1e-3);
        assert!(b.sigma2 < 0.01 / 150.0);
    }

    proptest! {
        #[test]
        fn gaussian_fusion_is_order_independent(
            mu in 0.1f64..2.0, s2 in 1e-4f64..0.1,
            obs in proptest::collection::vec((0.1f64..2.0, 1e-4f64..0.1), 1..8),
            rot in 0usize..8,
        ) {
            let b = belief(mu, s2);
            let fuse_all = |seq: &[(f64, f64)]| seq.iter().fold(b, |acc, &(x, v)| fuse_observation(&acc, x, v, OutlierModel::GaussianOnly));
            let forward = fuse_all(&obs);
            let mut shuffled = obs.clone();
            shuffled.reverse();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            let other = fuse_all(&shuffled);
            prop_assert!((forward.mu - other.mu).abs() <= 1e-12 * forward.mu.abs().max(1.0));
            prop_assert!((forward.sigma2 - other.sigma2).abs() <= 1e-12 * forward.sigma2);
        }

        #[test]
        fn gaussian_fusion_never_increases_variance(mu in 0.1f64..2.0, s2 in 1e-6f64..1.0, x in -1.0f64..3.0, v in 1e-6f64..1.0) {
            let f = fuse_observation(&belief(mu, s2), x, v, OutlierModel::GaussianOnly);
            prop_assert!(f.sigma2 <= s2);
        }
    }

    #[test]
    fn init_examples() {
        let zd = DepthImage::constant(3, 2, 2.0);
        let m = init_beliefs(&zd, &zd, 0.01).unwrap();
        let b = m.get(1, 1);
        assert_eq!(b.mu, 0.5);
        assert!((b.sigma2.sqrt() - 0.01).abs() < 1e-15);
        assert_eq!((b.a, b.b), (10.0, 10.0));
        assert!((b.z_min - 1.8).abs() < 1e-12 && (b.z_max - 2.2).abs() < 1e-12);

        let m = init_beliefs(&DepthImage::constant(3, 2, 1.0), &DepthImage::constant(3, 2, 2.0), 0.01).unwrap();
        assert!((m.get(0, 0).sigma2.sqrt() - 0.5).abs() < 1e-15);

        let mut holey = zd.clone();
        holey.set(2, 0, None);
        let m = init_beliefs(&holey, &zd, 0.01).unwrap();
        assert!(!m.get(2, 0).valid);
        assert_eq!(m.valid_count(), 5);
    }

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(50.0, 50.0, 8.0, 6.0, 16, 12).unwrap()
    }

    #[test]
    fn identity_observation_halves_variance() {
        let z = DepthImage::from_fn(16, 12, |x, y| Some(1.0 + 0.05 * x as f64 + 0.02 * y as f64));
        let m = init_beliefs(&z, &z, 0.1).unwrap();
        let obs_var = m.get(0, 0).sigma2;
        let out = observe_from_keyframe(&m, &m.mean_depth(), &Pose::identity(), &k(), obs_var, OutlierModel::GaussianOnly).unwrap();
        for (a, b) in m.beliefs().iter().zip(out.beliefs()) {
            assert!((b.sigma2 - a.sigma2 / 2.0).abs() < 1e-15);
            assert!((b.mu - a.mu).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_view_observation_changes_nothing() {
        let z = DepthImage::constant(16, 12, 2.0);
        let m = init_beliefs(&z, &z, 0.1).unwrap();
        let away = Pose::from_translation(Vector3::new(100.0, 0.0, 0.0));
        let out = observe_from_keyframe(&m, &z, &away, &k(), 0.01, OutlierModel::Mixture).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn extract_gates() {
        let z = DepthImage::constant(4, 4, 2.0);
        let mut m = init_beliefs(&z, &z, 0.001).unwrap();
        for b in m.beliefs.iter_mut() {
            b.a = 100.0;
            b.b = 1.0;
        }
        assert_eq!(extract_refined(&m, 0.6, 0.01).depth.valid_count(), 16);
        for b in m.beliefs.iter_mut() {
            b.a = 1.0;
            b.b = 100.0;
        }
        let r = extract_refined(&m, 0.6, 0.01);
        assert_eq!(r.depth.valid_count(), 0);
        assert_eq!(r.outliers.iter().filter(|&&o| o).count(), 16);

        let mut expected = 0;
        for (i, b) in m.beliefs.iter_mut().enumerate() {
            b.a = if i % 3 == 0 { 50.0 } else { 5.0 };
            b.b = 10.0;
            b.sigma2 = if i % 2 == 0 { 1e-6 } else { 1.0 };
            if i % 3 == 0 && i % 2 == 0 {
                expected += 1;
            }
        }
        assert_eq!(extract_refined(&m, 0.6, 0.01).depth.valid_count(), expected);
    }

    #[test]
    fn binary_round_trip() {
        let z = DepthImage::from_fn(5, 3, |x, y| (x != 2).then(|| 1.0 + 0.25 * (x + y) as f64));
        let m = init_beliefs(&z, &DepthImage::constant(5, 3, 1.5), 0.01).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 15 * 24);
        let back = BeliefMap::read_from(&buf[..]).unwrap();
        assert_eq!(back.dims(), (5, 3));
        for (a, b) in m.beliefs().iter().zip(back.beliefs()) {
            assert_eq!(a.valid, b.valid);
            if a.valid {
                assert_eq!(b.mu, f64::from(a.mu as f32));
                assert_eq!(b.z_max, f64::from(a.z_max as f32));
            }
        }
        assert!(BeliefMap::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
