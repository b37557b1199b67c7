use nalgebra::{Rotation3, Unit, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::densify::SuperpixelLabels;
use crate::error::{Error, Result};
use crate::geometry::{check_dims, DepthImage, NormalImage};

// Independent ChaCha8 streams so that enabling one noise source does not
// shift the draws of another.
const STREAM_GAUSSIAN: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_NORMALS: u64 = 3;
const STREAM_SAMPLING: u64 = 4;

/// Corruption applied to a rendered prior to imitate a learned depth network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Multiplicative depth bias; 1 leaves depths untouched.
    pub global_scale: f64,
    /// Standard deviation of per-pixel relative Gaussian noise.
    pub gaussian_rel: f64,
    /// Probability that a pixel is invalidated.
    pub dropout: f64,
    /// Standard deviation (radians) of the random normal rotation.
    pub normal_angle_noise: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            global_scale: 1.0,
            gaussian_rel: 0.0,
            dropout: 0.0,
            normal_angle_noise: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.global_scale > 0.0 && self.global_scale.is_finite()) {
            return Err(Error::invalid("global_scale must be positive"));
        }
        if !(self.gaussian_rel >= 0.0 && self.gaussian_rel.is_finite()) {
            return Err(Error::invalid("gaussian_rel must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1]"));
        }
        if !(self.normal_angle_noise >= 0.0 && self.normal_angle_noise.is_finite()) {
            return Err(Error::invalid("normal_angle_noise must be non-negative"));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Applies scale bias, relative Gaussian noise and dropout to a depth map, in
/// that order. One draw per pixel in raster order, valid or not.
pub fn corrupt_depth(depth: &DepthImage, spec: &NoiseSpec) -> Result<DepthImage> {
    spec.validate()?;
    let mut out = depth.clone();
    if spec.global_scale != 1.0 {
        out = out.map_valid(|z| Some(z * spec.global_scale));
    }
    if spec.gaussian_rel > 0.0 {
        let mut rng = stream(spec.seed, STREAM_GAUSSIAN);
        for i in 0..out.len() {
            let g: f64 = rng.sample(StandardNormal);
            if let Some(z) = out.get_index(i) {
                out.set_index(i, Some(z * (1.0 + spec.gaussian_rel * g)));
            }
        }
    }
    if spec.dropout > 0.0 {
        let mut rng = stream(spec.seed, STREAM_DROPOUT);
        for i in 0..out.len() {
            if rng.random::<f64>() < spec.dropout {
                out.set_index(i, None);
            }
        }
    }
    Ok(out)
}

/// Rotates every normal about a uniformly random perpendicular axis by an
/// angle drawn from `N(0, normal_angle_noise^2)`.
pub fn corrupt_normals(normals: &NormalImage, spec: &NoiseSpec) -> Result<NormalImage> {
    spec.validate()?;
    let mut out = normals.clone();
    if spec.normal_angle_noise == 0.0 {
        return Ok(out);
    }
    let mut rng = stream(spec.seed, STREAM_NORMALS);
    for i in 0..out.values().len() {
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let angle = spec.normal_angle_noise * rng.sample::<f64, _>(StandardNormal);
        let Some(n) = out.get_index(i) else { continue };
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = n.cross(&helper).normalize();
        let e2 = n.cross(&e1);
        let axis = Unit::new_normalize(e1 * phi.cos() + e2 * phi.sin());
        out.set_index(i, Some(Rotation3::from_axis_angle(&axis, angle) * n));
    }
    Ok(out)
}

/// Corrupts a depth map and its normals with the same spec.
pub fn corrupt(depth: &DepthImage, normals: &NormalImage, spec: &NoiseSpec) -> Result<(DepthImage, NormalImage)> {
    check_dims(depth.dims(), normals.dims())?;
    Ok((corrupt_depth(depth, spec)?, corrupt_normals(normals, spec)?))
}

/// Keeps up to `per_superpixel` uniformly chosen valid pixels of every
/// superpixel.
pub fn sample_sparse(
    depth: &DepthImage,
    labels: &SuperpixelLabels,
    per_superpixel: usize,
    seed: u64,
) -> Result<DepthImage> {
    check_dims(depth.dims(), labels.dims())?;
    let mut rng = stream(seed, STREAM_SAMPLING);
    let mut out = DepthImage::invalid(depth.width(), depth.height());
    for members in labels.members() {
        let valid: Vec<usize> = members.into_iter().filter(|&i| depth.get_index(i).is_some()).collect();
        let amount = per_superpixel.min(valid.len());
        if amount == 0 {
            continue;
        }
        for j in index::sample(&mut rng, valid.len(), amount) {
            let i = valid[j];
            out.set_index(i, depth.get_index(i));
        }
    }
    Ok(out)
}

/// Keeps `round(density * valid_count)` uniformly chosen valid pixels.
pub fn sample_density(depth: &DepthImage, density: f64, seed: u64) -> Result<DepthImage> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid("sampling density must lie in [0, 1]"));
    }
    let valid: Vec<usize> = (0..depth.len()).filter(|&i| depth.get_index(i).is_some()).collect();
    let amount = ((density * valid.len() as f64).round() as usize).min(valid.len());
    let mut rng = stream(seed, STREAM_SAMPLING);
    let mut out = DepthImage::invalid(depth.width(), depth.height());
    for j in index::sample(&mut rng, valid.len(), amount) {
        out.set_index(valid[j], depth.get_index(valid[j]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depth() -> DepthImage {
        DepthImage::from_fn(20, 10, |x, y| (x != 3).then(|| 1.0 + 0.01 * (x * y) as f64 + 0.1))
    }

    fn normals() -> NormalImage {
        let mut n = NormalImage::invalid(20, 10);
        for i in 0..200 {
            n.set_index(i, Some(Vector3::new(0.1 * (i % 7) as f64, -0.2, 1.0)));
        }
        n
    }

    #[test]
    fn neutral_spec_is_bit_identical() {
        let (d, n) = corrupt(&depth(), &normals(), &NoiseSpec::none()).unwrap();
        assert_eq!(d, depth());
        assert_eq!(n.values(), normals().values());
    }

    #[test]
    fn scale_only_doubles_exactly() {
        let spec = NoiseSpec {
            global_scale: 2.0,
            ..NoiseSpec::none()
        };
        let d = corrupt_depth(&depth(), &spec).unwrap();
        for (x, y, z) in depth().iter_valid() {
            assert_eq!(d.get(x, y), Some(2.0 * z));
        }
        assert_eq!(d.valid_count(), depth().valid_count());
    }

    #[test]
    fn same_seed_same_output() {
        let spec = NoiseSpec {
            global_scale: 1.2,
            gaussian_rel: 0.05,
            dropout: 0.1,
            normal_angle_noise: 0.05,
            seed: 7,
        };
        let a = corrupt(&depth(), &normals(), &spec).unwrap();
        let b = corrupt(&depth(), &normals(), &spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.values(), b.1.values());
        let c = corrupt_depth(&depth(), &NoiseSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.0, c);
    }

    #[test]
    fn normal_noise_keeps_unit_length_and_rotates_by_small_angles() {
        let spec = NoiseSpec {
            normal_angle_noise: 0.02,
            ..NoiseSpec::none()
        };
        let before = normals();
        let after = corrupt_normals(&before, &spec).unwrap();
        for i in 0..200 {
            let (a, b) = (before.get_index(i).unwrap(), after.get_index(i).unwrap());
            assert!((b.norm() - 1.0).abs() < 1e-12);
            assert!(a.angle(&b) < 0.2);
        }
    }

    #[test]
    fn dropout_rate_is_plausible() {
        let d = DepthImage::constant(100, 100, 1.0);
        let spec = NoiseSpec {
            dropout: 0.1,
            ..NoiseSpec::none()
        };
        let kept = corrupt_depth(&d, &spec).unwrap().valid_count();
        assert!((8700..9300).contains(&kept), "{kept}");
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            NoiseSpec { global_scale: 0.0, ..NoiseSpec::none() },
            NoiseSpec { gaussian_rel: -0.1, ..NoiseSpec::none() },
            NoiseSpec { dropout: 1.5, ..NoiseSpec::none() },
            NoiseSpec { normal_angle_noise: f64::NAN, ..NoiseSpec::none() },
        ] {
            assert!(corrupt_depth(&depth(), &spec).is_err());
        }
    }

    #[test]
    fn sparse_sampling_examples() {
        let d = depth();
        let labels = SuperpixelLabels::from_raw(20, 10, (0..200).map(|i| ((i % 20) / 5) as u32).collect()).unwrap();
        assert_eq!(sample_sparse(&d, &labels, 0, 1).unwrap().valid_count(), 0);
        assert_eq!(sample_sparse(&d, &labels, 10_000, 1).unwrap(), d);
        let one = sample_sparse(&d, &labels, 1, 1).unwrap();
        let mut per_label = [0; 4];
        for (x, y, z) in one.iter_valid() {
            per_label[labels.get(x, y) as usize] += 1;
            assert_eq!(d.get(x, y), Some(z));
        }
        assert_eq!(per_label, [1, 1, 1, 1]);
        assert_eq!(one, sample_sparse(&d, &labels, 1, 1).unwrap());
    }

    #[test]
    fn density_sampling() {
        let d = depth();
        let s = sample_density(&d, 0.1, 3).unwrap();
        assert_eq!(s.valid_count(), 19);
        assert_eq!(s, sample_density(&d, 0.1, 3).unwrap());
        assert_eq!(sample_density(&d, 1.0, 3).unwrap(), d);
        assert!(sample_density(&d, 1.1, 3).is_err());
    }
}
