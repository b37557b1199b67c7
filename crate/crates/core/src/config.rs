//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::densify::DensifyParams;
use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::metrics::{DisparityModel, LossParams};
use crate::refine::OutlierModel;
use crate::synth::NoiseSpec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputSource {
    /// A fixture name or the path of a scene text file.
    Synthetic(String),
    /// A TUM RGB-D style sequence directory.
    Tum(PathBuf),
}

/// Thresholds and noise levels of the keyframe refinement, in inverse depth (1/m).
/// `obs_sigma` is a standard deviation; the default variance is 0.01.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineParams {
    pub sigma_floor: f64,
    pub obs_sigma: f64,
    pub min_inlier_ratio: f64,
    pub max_sigma: f64,
    pub outlier_model: OutlierModel,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            sigma_floor: 0.01,
            obs_sigma: 0.1,
            min_inlier_ratio: 0.5,
            max_sigma: 0.05,
            outlier_model: OutlierModel::Mixture,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub input: InputSource,
    /// Directory of depth PNG priors named like the sequence's depth files
    /// (sequence input only). Without it the sensor depth is corrupted with
    /// `noise` to stand in for a learned prior.
    pub prior_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Number of frames on the synthetic camera path.
    pub frames: usize,
    pub keyframe_stride: usize,
    /// Previous keyframes that contribute sparse points to a new keyframe.
    pub window_size: usize,
    /// Fraction of valid host pixels turned into sparse points.
    pub point_density: f64,
    /// Camera intrinsics; width and height only apply to synthetic input.
    pub camera: CameraIntrinsics,
    pub densify: DensifyParams,
    pub noise: NoiseSpec,
    pub disparity: DisparityModel,
    pub loss: LossParams,
    pub refine: RefineParams,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputSource::Synthetic("box_room".into()),
            prior_dir: None,
            output_dir: PathBuf::from("out"),
            frames: 30,
            keyframe_stride: 10,
            window_size: 2,
            point_density: 0.02,
            camera: crate::synth::fixture_camera(),
            densify: DensifyParams::default(),
            noise: NoiseSpec::none(),
            disparity: DisparityModel::default(),
            loss: LossParams::default(),
            refine: RefineParams::default(),
            workers: 1,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str, path: &Path, line: usize) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(path, line, format!("invalid value {raw:?} for `{key}`")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input == InputSource::Tum(PathBuf::new()) {
            return Err(Error::invalid("tum input needs tum_dir"));
        }
        if self.frames == 0 {
            return Err(Error::invalid("frames must be at least 1"));
        }
        if self.keyframe_stride == 0 {
            return Err(Error::invalid("keyframe_stride must be at least 1"));
        }
        if !(self.point_density > 0.0 && self.point_density <= 1.0) {
            return Err(Error::invalid("point_density must lie in (0, 1]"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        self.camera.validate()?;
        self.densify.filter.validate()?;
        self.densify.bilateral.validate()?;
        self.noise.validate()?;
        self.loss.validate()?;
        let d = self.disparity;
        if !(d.f_train > 0.0 && d.baseline > 0.0 && d.f_train.is_finite() && d.baseline.is_finite()) {
            return Err(Error::invalid("f_train and baseline must be positive"));
        }
        let r = self.refine;
        if !(r.sigma_floor > 0.0 && r.obs_sigma > 0.0 && r.max_sigma > 0.0) {
            return Err(Error::invalid("refinement sigmas must be positive"));
        }
        if !(0.0..=1.0).contains(&r.min_inlier_ratio) {
            return Err(Error::invalid("refine_min_inlier_ratio must lie in [0, 1]"));
        }
        if self.densify.superpixel.region_size == 0 || !(self.densify.superpixel.compactness > 0.0) {
            return Err(Error::invalid("superpixel size and compactness must be positive"));
        }
        Ok(())
    }

    /// Sets one key from its text value. `path` and `line` locate errors.
    pub fn set(&mut self, key: &str, raw: &str, path: &Path, line: usize) -> Result<()> {
        let v = |k| -> Result<f64> { value(k, raw, path, line) };
        let u = |k| -> Result<usize> { value(k, raw, path, line) };
        match key {
            "source" => {
                self.input = match raw {
                    "synthetic" => InputSource::Synthetic(match &self.input {
                        InputSource::Synthetic(s) => s.clone(),
                        InputSource::Tum(_) => "box_room".into(),
                    }),
                    "tum" => InputSource::Tum(match &self.input {
                        InputSource::Tum(p) => p.clone(),
                        InputSource::Synthetic(_) => PathBuf::new(),
                    }),
                    _ => return Err(Error::parse(path, line, format!("source must be synthetic or tum, got {raw:?}"))),
                }
            }
            "scene" => self.input = InputSource::Synthetic(raw.to_string()),
            "tum_dir" => self.input = InputSource::Tum(PathBuf::from(raw)),
            "prior_dir" => self.prior_dir = (!raw.is_empty()).then(|| PathBuf::from(raw)),
            "output_dir" => self.output_dir = PathBuf::from(raw),
            "frames" => self.frames = u(key)?,
            "keyframe_stride" => self.keyframe_stride = u(key)?,
            "window_size" => self.window_size = u(key)?,
            "point_density" => self.point_density = v(key)?,
            "fx" => self.camera.fx = v(key)?,
            "fy" => self.camera.fy = v(key)?,
            "cx" => self.camera.cx = v(key)?,
            "cy" => self.camera.cy = v(key)?,
            "width" => self.camera.width = u(key)?,
            "height" => self.camera.height = u(key)?,
            "psi" => self.densify.filter.psi = v(key)?,
            "sigma" => self.densify.filter.sigma = u(key)?,
            "iterations" => self.densify.filter.iterations = u(key)?,
            "bilateral_radius" => self.densify.bilateral.radius = u(key)?,
            "bilateral_sigma_spatial" => self.densify.bilateral.sigma_spatial = v(key)?,
            "bilateral_sigma_range" => self.densify.bilateral.sigma_range = v(key)?,
            "superpixel_size" => self.densify.superpixel.region_size = u(key)?,
            "superpixel_compactness" => self.densify.superpixel.compactness = v(key)?,
            "noise_scale" => self.noise.global_scale = v(key)?,
            "noise_gaussian" => self.noise.gaussian_rel = v(key)?,
            "noise_dropout" => self.noise.dropout = v(key)?,
            "noise_normal_angle" => self.noise.normal_angle_noise = v(key)?,
            "seed" => self.noise.seed = value(key, raw, path, line)?,
            "baseline" => self.disparity.baseline = v(key)?,
            "f_train" => self.disparity.f_train = v(key)?,
            "loss_alpha" => self.loss.alpha = v(key)?,
            "loss_beta" => self.loss.beta = v(key)?,
            "loss_gamma" => self.loss.gamma = v(key)?,
            "loss_huber_delta_rel" => self.loss.huber_delta_rel = v(key)?,
            "refine_sigma_floor" => self.refine.sigma_floor = v(key)?,
            "refine_obs_sigma" => self.refine.obs_sigma = v(key)?,
            "refine_min_inlier_ratio" => self.refine.min_inlier_ratio = v(key)?,
            "refine_max_sigma" => self.refine.max_sigma = v(key)?,
            "refine_outlier_model" => {
                self.refine.outlier_model = match raw {
                    "mixture" => OutlierModel::Mixture,
                    "gaussian" => OutlierModel::GaussianOnly,
                    _ => return Err(Error::parse(path, line, format!("outlier model must be mixture or gaussian, got {raw:?}"))),
                }
            }
            "workers" => self.workers = u(key)?,
            _ => return Err(Error::parse(path, line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults. Blank lines and
    /// `#` comments are ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, raw)) = line.split_once('=') else {
                return Err(Error::parse(path, line_no, "expected `key = value`"));
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(path, line_no, format!("duplicate key `{key}`")));
            }
            cfg.set(key, raw.trim(), path, line_no)?;
        }
        cfg.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Every key in a fixed order, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| writeln!(s, "{k} = {v}").unwrap();
        match &self.input {
            InputSource::Synthetic(scene) => {
                kv("source", &"synthetic");
                kv("scene", scene);
            }
            InputSource::Tum(dir) => {
                kv("source", &"tum");
                kv("tum_dir", &dir.display());
            }
        }
        if let Some(p) = &self.prior_dir {
            kv("prior_dir", &p.display());
        }
        kv("output_dir", &self.output_dir.display());
        kv("frames", &self.frames);
        kv("keyframe_stride", &self.keyframe_stride);
        kv("window_size", &self.window_size);
        kv("point_density", &self.point_density);
        let k = &self.camera;
        kv("fx", &k.fx);
        kv("fy", &k.fy);
        kv("cx", &k.cx);
        kv("cy", &k.cy);
        kv("width", &k.width);
        kv("height", &k.height);
        let f = &self.densify.filter;
        kv("psi", &f.psi);
        kv("sigma", &f.sigma);
        kv("iterations", &f.iterations);
        let b = &self.densify.bilateral;
        kv("bilateral_radius", &b.radius);
        kv("bilateral_sigma_spatial", &b.sigma_spatial);
        kv("bilateral_sigma_range", &b.sigma_range);
        let sp = &self.densify.superpixel;
        kv("superpixel_size", &sp.region_size);
        kv("superpixel_compactness", &sp.compactness);
        let n = &self.noise;
        kv("noise_scale", &n.global_scale);
        kv("noise_gaussian", &n.gaussian_rel);
        kv("noise_dropout", &n.dropout);
        kv("noise_normal_angle", &n.normal_angle_noise);
        kv("seed", &n.seed);
        kv("baseline", &self.disparity.baseline);
        kv("f_train", &self.disparity.f_train);
        let l = &self.loss;
        kv("loss_alpha", &l.alpha);
        kv("loss_beta", &l.beta);
        kv("loss_gamma", &l.gamma);
        kv("loss_huber_delta_rel", &l.huber_delta_rel);
        let r = &self.refine;
        kv("refine_sigma_floor", &r.sigma_floor);
        kv("refine_obs_sigma", &r.obs_sigma);
        kv("refine_min_inlier_ratio", &r.min_inlier_ratio);
        kv("refine_max_sigma", &r.max_sigma);
        kv(
            "refine_outlier_model",
            &match r.outlier_model {
                OutlierModel::Mixture => "mixture",
                OutlierModel::GaussianOnly => "gaussian",
            },
        );
        kv("workers", &self.workers);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(s: &str) -> String {
        s.split_whitespace().collect()
    }

    #[test]
    fn defaults_follow_reference_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.densify.filter.psi, 0.95);
        assert_eq!(c.densify.filter.sigma, 5);
        assert_eq!(c.disparity.baseline, 0.1);
        assert_eq!((c.loss.alpha, c.loss.beta, c.loss.gamma), (1.0, 0.1, 0.05));
        assert_eq!(c.keyframe_stride, 10);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut c = PipelineConfig {
            input: InputSource::Tum(PathBuf::from("/data/fr1_desk")),
            prior_dir: Some(PathBuf::from("/data/priors")),
            ..PipelineConfig::default()
        };
        c.noise.global_scale = 1.2;
        c.noise.seed = 42;
        c.refine.outlier_model = OutlierModel::GaussianOnly;
        c.workers = 8;
        let text = c.to_text();
        let back = PipelineConfig::parse(&text, Path::new("c.cfg")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
        // Whitespace and comments do not matter.
        let messy: String = text.lines().map(|l| format!("  {}   # note\n\n", l.replace(" = ", "=")) ).collect();
        let again = PipelineConfig::parse(&messy, Path::new("c.cfg")).unwrap();
        assert_eq!(strip(&again.to_text()), strip(&text));
    }

    #[test]
    fn unknown_and_bad_keys_are_errors() {
        let p = Path::new("c.cfg");
        match PipelineConfig::parse("psi = 0.9\nsigmaa = 3\n", p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("sigmaa"));
            }
            other => panic!("{other:?}"),
        }
        assert!(PipelineConfig::parse("psi = abc\n", p).is_err());
        assert!(PipelineConfig::parse("psi 0.9\n", p).is_err());
        assert!(PipelineConfig::parse("psi = 0.9\npsi = 0.8\n", p).is_err());
        assert!(PipelineConfig::parse("psi = 1.5\n", p).is_err());
        assert!(PipelineConfig::parse("workers = 0\n", p).is_err());
        assert!(PipelineConfig::parse("source = kitti\n", p).is_err());
    }
}
