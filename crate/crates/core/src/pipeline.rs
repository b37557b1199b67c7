//! End-to-end keyframe processing: scale correction, sparse-to-dense
//! reconstruction and multi-keyframe refinement, with file outputs.
//!
//! Camera tracking is not part of this crate. Poses come from the ground
//! truth (sequence input) or the scene's camera path (synthetic input), and
//! the tracker's mature points are emulated by sampling exact depth from
//! previous keyframes.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::config::{InputSource, PipelineConfig};
use crate::densify::{normal_guided_filter, sparse_to_dense_steps};
use crate::error::{Error, Result};
use crate::geometry::{
    depth_to_disparity, depth_to_normal, focal_adapt, CameraIntrinsics, ColorImage, DepthImage, NormalImage, Pose,
};
use crate::io::{export_ply, read_depth_png, save_window, write_depth_png, write_trajectory, MetricReport, DEPTH_PNG_SCALE};
use crate::metrics::{ate, coupled_loss, pcd, AlignMode, LossInputs, Trajectory, ASSOCIATION_WINDOW};
use crate::refine::{extract_refined, init_beliefs, observe_from_keyframe};
use crate::scale::{overlay_optimized, scale_correct, warp_points, ActiveWindow, MaturePoint};
use crate::synth::{corrupt_depth, corrupt_normals, fixture, render, sample_density, NoiseSpec, PlanarScene};

/// Everything known about one keyframe before reconstruction.
#[derive(Clone, Debug)]
pub struct KeyframeInput {
    pub frame: usize,
    pub timestamp: f64,
    /// Camera-to-world.
    pub pose: Pose,
    pub color: ColorImage,
    /// Reference depth used for evaluation and for emulated sparse points.
    pub gt_depth: DepthImage,
    pub gt_normals: NormalImage,
    /// Dense depth prior at the test focal length.
    pub prior: DepthImage,
    /// Predicted normals.
    pub normals: NormalImage,
}

/// Reconstruction products of one keyframe.
#[derive(Clone, Debug)]
pub struct KeyframeOutput {
    pub frame: usize,
    pub timestamp: f64,
    pub pose: Pose,
    pub window: ActiveWindow,
    pub factor: f64,
    pub points_used: usize,
    /// Scale-corrected prior with the sparse points written over it.
    pub z_cor: DepthImage,
    pub z_dense: DepthImage,
    pub z_refined: DepthImage,
    pub z_cor_refined: DepthImage,
    pub outliers: usize,
    pub pcd_prior: f64,
    pub pcd_cor: f64,
    pub pcd_dense: f64,
    pub pcd_refined: f64,
    pub pcd_cor_refined: f64,
    pub loss_total: f64,
    pub color: ColorImage,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub camera: CameraIntrinsics,
    pub keyframes: Vec<KeyframeOutput>,
    pub report: MetricReport,
}

fn mix_seed(seed: u64, frame: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(frame as u64)
}

/// Camera-to-world pose of frame `i` on the synthetic path: a lateral sway
/// with a slight yaw while moving forward 0.2 m over the sequence.
pub fn synthetic_camera_pose(viewpoint: &Pose, i: usize, frames: usize) -> Pose {
    let phase = TAU * i as f64 / frames as f64;
    let progress = i as f64 / frames as f64;
    let local = Pose::from_axis_angle(
        Vector3::y(),
        0.04 * phase.sin(),
        Vector3::new(0.15 * phase.sin(), 0.0, 0.2 * progress),
    );
    *viewpoint * local
}

fn keyframe_indices(frames: usize, stride: usize) -> Vec<usize> {
    (0..frames).step_by(stride).collect()
}

fn synthetic_inputs(cfg: &PipelineConfig, scene_ref: &str) -> Result<(CameraIntrinsics, Vec<KeyframeInput>, Trajectory)> {
    let scene = match fixture(scene_ref) {
        Some(s) => s,
        None => PlanarScene::load(Path::new(scene_ref))?,
    };
    let k = cfg.camera;
    let mut inputs = Vec::new();
    for frame in keyframe_indices(cfg.frames, cfg.keyframe_stride) {
        let pose = synthetic_camera_pose(&scene.viewpoint, frame, cfg.frames);
        let view = render(&scene, &pose, &k).map_err(|e| keyframe_err(frame, e))?;
        let noise = NoiseSpec {
            seed: mix_seed(cfg.noise.seed, frame),
            ..cfg.noise
        };
        inputs.push(KeyframeInput {
            frame,
            timestamp: frame as f64,
            pose,
            prior: corrupt_depth(&view.depth, &noise)?,
            normals: corrupt_normals(&view.normals, &noise)?,
            color: view.color,
            gt_depth: view.depth,
            gt_normals: view.normals,
        });
    }
    let gt = Trajectory::new(
        (0..cfg.frames)
            .map(|i| (i as f64, synthetic_camera_pose(&scene.viewpoint, i, cfg.frames)))
            .collect(),
    )?;
    Ok((k, inputs, gt))
}

fn sequence_inputs(cfg: &PipelineConfig, dir: &Path) -> Result<(CameraIntrinsics, Vec<KeyframeInput>, Trajectory)> {
    let seq = crate::io::load_tum_sequence(dir)?;
    if seq.frames.is_empty() {
        return Err(Error::invalid(format!("{}: no paired color/depth frames", dir.display())));
    }
    let mut k = cfg.camera;
    let mut inputs = Vec::new();
    for frame in keyframe_indices(seq.frames.len(), cfg.keyframe_stride) {
        let f = &seq.frames[frame];
        let Some((_, pose)) = seq.groundtruth.nearest(f.timestamp, ASSOCIATION_WINDOW) else {
            continue;
        };
        let wrap = |e| keyframe_err(frame, e);
        let color = f.load_color().map_err(wrap)?;
        let gt_depth = f.load_depth().map_err(wrap)?;
        if inputs.is_empty() {
            (k.width, k.height) = gt_depth.dims();
            k.validate()?;
        }
        let noise = NoiseSpec {
            seed: mix_seed(cfg.noise.seed, frame),
            ..cfg.noise
        };
        let prior = match &cfg.prior_dir {
            Some(pd) => {
                let name = f.depth_path.file_name().ok_or_else(|| Error::invalid("depth path has no file name"))?;
                let raw = read_depth_png(&pd.join(name), DEPTH_PNG_SCALE).map_err(wrap)?;
                focal_adapt(&raw, cfg.disparity.f_train, k.fx).map_err(wrap)?
            }
            None => corrupt_depth(&gt_depth, &noise)?,
        };
        let gt_normals = depth_to_normal(&gt_depth, &k).map_err(wrap)?;
        inputs.push(KeyframeInput {
            frame,
            timestamp: f.timestamp,
            pose: *pose,
            normals: corrupt_normals(&gt_normals, &noise)?,
            color,
            gt_depth,
            gt_normals,
            prior,
        });
    }
    if inputs.is_empty() {
        return Err(Error::invalid("no keyframe has a ground-truth pose within 20 ms"));
    }
    Ok((k, inputs, seq.groundtruth))
}

fn keyframe_err(frame: usize, e: Error) -> Error {
    match e {
        Error::Keyframe { .. } => e,
        e => Error::Keyframe {
            index: frame,
            source: Box::new(e),
        },
    }
}

/// Emulated active window for keyframe `j`: exact points sampled from the
/// previous `window_size` keyframes (the keyframe itself when it is first).
fn emulate_window(cfg: &PipelineConfig, inputs: &[KeyframeInput], j: usize) -> Result<ActiveWindow> {
    let hosts: Vec<usize> = if j == 0 {
        vec![0]
    } else {
        (j.saturating_sub(cfg.window_size.max(1))..j).collect()
    };
    let world_to_new = inputs[j].pose.inverse();
    let mut keyframes = Vec::new();
    let mut points = Vec::new();
    for h in hosts {
        let host = &inputs[h];
        let id = host.frame as u32;
        keyframes.push((id, world_to_new * host.pose));
        let sparse = sample_density(&host.gt_depth, cfg.point_density, mix_seed(cfg.noise.seed, host.frame))?;
        points.extend(sparse.iter_valid().map(|(x, y, z)| MaturePoint {
            host: id,
            u: x as f64,
            v: y as f64,
            z,
            baseline_rel: 1.0,
        }));
    }
    ActiveWindow::new(keyframes, points)
}

struct Stage1 {
    window: ActiveWindow,
    factor: f64,
    points_used: usize,
    z_cor: DepthImage,
    z_dense: DepthImage,
    loss_total: f64,
}

fn reconstruct(cfg: &PipelineConfig, k: &CameraIntrinsics, inputs: &[KeyframeInput], j: usize) -> Result<Stage1> {
    let kf = &inputs[j];
    let window = emulate_window(cfg, inputs, j)?;
    let warped = warp_points(&window, k);
    let (z_cor, factor, points_used) = match scale_correct(&kf.prior, &warped.points) {
        Ok(c) => (c.depth, c.factor, c.used),
        Err(Error::NoCorrectionEvidence) => (kf.prior.clone(), 1.0, 0),
        Err(e) => return Err(e),
    };
    let z_cor = overlay_optimized(&z_cor, &warped.depth)?;
    let steps = sparse_to_dense_steps(&warped.depth, &kf.normals, &kf.color, k, &cfg.densify)?;

    let dm = cfg.disparity;
    let d_hat = depth_to_disparity(&kf.prior, dm.f_train, dm.baseline)?;
    let d_gt = depth_to_disparity(&kf.gt_depth, dm.f_train, dm.baseline)?;
    let z_re = normal_guided_filter(&kf.prior, &kf.normals, k, &cfg.densify.filter, None)?;
    let n_re = depth_to_normal(&kf.prior, k)?;
    let loss = coupled_loss(
        &LossInputs {
            d_hat: &d_hat,
            n_hat: &kf.normals,
            d_gt: &d_gt,
            n_gt: &kf.gt_normals,
            z_re: &z_re,
            n_re: &n_re,
            disparity: dm,
        },
        &cfg.loss,
    )?;
    Ok(Stage1 {
        window,
        factor,
        points_used,
        z_cor,
        z_dense: steps.dense,
        loss_total: loss.total,
    })
}

/// Refines keyframe `j`'s depth `maps[j]` with the matching maps of its
/// neighbours. The belief spread starts from the disagreement with `spread_ref`.
fn refine_against_neighbours(
    cfg: &PipelineConfig,
    k: &CameraIntrinsics,
    inputs: &[KeyframeInput],
    maps: &[&DepthImage],
    spread_ref: &DepthImage,
    j: usize,
) -> Result<(DepthImage, usize)> {
    if maps[j].valid_count() == 0 {
        return Ok((maps[j].clone(), 0));
    }
    let r = cfg.refine;
    let mut beliefs = init_beliefs(maps[j], spread_ref, r.sigma_floor)?;
    let this_from_world = inputs[j].pose.inverse();
    for nb in [j.checked_sub(1), Some(j + 1)].into_iter().flatten() {
        if nb >= inputs.len() {
            continue;
        }
        let rel = this_from_world * inputs[nb].pose;
        beliefs = observe_from_keyframe(&beliefs, maps[nb], &rel, k, r.obs_sigma * r.obs_sigma, r.outlier_model)?;
    }
    let refined = extract_refined(&beliefs, r.min_inlier_ratio, r.max_sigma);
    Ok((refined.depth, refined.outliers.iter().filter(|&&o| o).count()))
}

/// Runs the whole pipeline in memory.
pub fn process(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| process_inner(cfg))
}

fn process_inner(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (k, inputs, gt_traj) = match &cfg.input {
        InputSource::Synthetic(scene) => synthetic_inputs(cfg, scene)?,
        InputSource::Tum(dir) => sequence_inputs(cfg, dir)?,
    };
    let stage1: Vec<Stage1> = (0..inputs.len())
        .map(|j| reconstruct(cfg, &k, &inputs, j).map_err(|e| keyframe_err(inputs[j].frame, e)))
        .collect::<Result<_>>()?;

    let dense_maps: Vec<&DepthImage> = stage1.iter().map(|s| &s.z_dense).collect();
    let cor_maps: Vec<&DepthImage> = stage1.iter().map(|s| &s.z_cor).collect();
    let refined: Vec<(DepthImage, usize, DepthImage)> = (0..inputs.len())
        .map(|j| {
            let (z, outliers) = refine_against_neighbours(cfg, &k, &inputs, &dense_maps, &stage1[j].z_cor, j)?;
            let (zc, _) = refine_against_neighbours(cfg, &k, &inputs, &cor_maps, &stage1[j].z_cor, j)?;
            Ok((z, outliers, zc))
        })
        .enumerate()
        .map(|(j, r)| r.map_err(|e| keyframe_err(inputs[j].frame, e)))
        .collect::<Result<_>>()?;

    let mut keyframes = Vec::with_capacity(inputs.len());
    for ((kf, s), (z_refined, outliers, z_cor_refined)) in inputs.into_iter().zip(stage1).zip(refined) {
        let wrap = |e| keyframe_err(kf.frame, e);
        let score = |z: &DepthImage| pcd(z, &kf.gt_depth).map_err(wrap);
        keyframes.push(KeyframeOutput {
            frame: kf.frame,
            timestamp: kf.timestamp,
            pose: kf.pose,
            pcd_prior: score(&kf.prior)?,
            pcd_cor: score(&s.z_cor)?,
            pcd_dense: score(&s.z_dense)?,
            pcd_refined: score(&z_refined)?,
            pcd_cor_refined: score(&z_cor_refined)?,
            window: s.window,
            factor: s.factor,
            points_used: s.points_used,
            z_cor: s.z_cor,
            z_dense: s.z_dense,
            z_refined,
            z_cor_refined,
            outliers,
            loss_total: s.loss_total,
            color: kf.color,
        });
    }

    let mut report = MetricReport::default();
    report.note("camera poses are taken from the ground truth, not estimated; ATE only checks the bookkeeping");
    report.note("sparse points are exact depths sampled from previous keyframes (uniform baseline weights)");
    let est = Trajectory::new(keyframes.iter().map(|o| (o.timestamp, o.pose)).collect())?;
    match ate(&est, &gt_traj, AlignMode::Rigid) {
        Ok(a) => report.push("ate_rmse_m", a.rmse),
        Err(Error::TooFewAssociations { .. }) => report.note("ATE skipped: fewer than two keyframes"),
        Err(e) => return Err(e),
    }
    let n = keyframes.len() as f64;
    let mean = |f: fn(&KeyframeOutput) -> f64| keyframes.iter().map(f).sum::<f64>() / n;
    report.push("keyframes", n);
    report.push("pcd_prior", mean(|o| o.pcd_prior));
    report.push("pcd_cor", mean(|o| o.pcd_cor));
    report.push("pcd_dense", mean(|o| o.pcd_dense));
    report.push("pcd_refined", mean(|o| o.pcd_refined));
    report.push("pcd_cor_refined", mean(|o| o.pcd_cor_refined));
    report.push("coupled_loss", mean(|o| o.loss_total));
    for o in &keyframes {
        let p = format!("kf{:05}", o.frame);
        report.push(format!("{p}_scale_factor"), o.factor);
        report.push(format!("{p}_points_used"), o.points_used as f64);
        report.push(format!("{p}_pcd_cor"), o.pcd_cor);
        report.push(format!("{p}_pcd_dense"), o.pcd_dense);
        report.push(format!("{p}_pcd_refined"), o.pcd_refined);
        report.push(format!("{p}_outliers"), o.outliers as f64);
    }
    Ok(PipelineOutput {
        camera: k,
        keyframes,
        report,
    })
}

/// Files produced by [`run_pipeline`].
#[derive(Clone, Debug, Default)]
pub struct PipelineFiles {
    pub written: Vec<PathBuf>,
}

/// Runs the pipeline and writes depth PNGs, PLY clouds, active-window files,
/// the keyframe trajectory, the resolved config and the metric report into
/// `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(PipelineOutput, PipelineFiles)> {
    let out = process(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = PipelineFiles::default();
    let mut record = |p: PathBuf| {
        files.written.push(p.clone());
        p
    };
    let k = &out.camera;
    for o in &out.keyframes {
        let wrap = |e| keyframe_err(o.frame, e);
        let p = format!("kf{:05}", o.frame);
        write_depth_png(&o.z_cor, &record(dir.join(format!("{p}_cor.png"))), DEPTH_PNG_SCALE).map_err(wrap)?;
        write_depth_png(&o.z_dense, &record(dir.join(format!("{p}_dense.png"))), DEPTH_PNG_SCALE).map_err(wrap)?;
        write_depth_png(&o.z_refined, &record(dir.join(format!("{p}_refined.png"))), DEPTH_PNG_SCALE).map_err(wrap)?;
        export_ply(&o.z_cor_refined, &o.color, k, &o.pose, &record(dir.join(format!("{p}_cor.ply")))).map_err(wrap)?;
        export_ply(&o.z_refined, &o.color, k, &o.pose, &record(dir.join(format!("{p}_dense.ply")))).map_err(wrap)?;
        save_window(
            &o.window,
            &record(dir.join(format!("{p}_points.txt"))),
            &record(dir.join(format!("{p}_poses.txt"))),
        )
        .map_err(wrap)?;
    }
    let traj = Trajectory::new(out.keyframes.iter().map(|o| (o.timestamp, o.pose)).collect())?;
    write_trajectory(&traj, &record(dir.join("trajectory.txt")))?;
    let write = |name: &str, text: String, files: &mut PipelineFiles| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        files.written.push(p);
        Ok(())
    };
    write("config.txt", cfg.to_text(), &mut files)?;
    write("report.txt", out.report.to_table(), &mut files)?;
    write("metrics.txt", out.report.to_key_values(), &mut files)?;
    Ok((out, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scene: &str) -> PipelineConfig {
        PipelineConfig {
            input: InputSource::Synthetic(scene.into()),
            frames: 20,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn zero_noise_box_room_is_exact() {
        let out = process(&small("box_room")).unwrap();
        assert_eq!(out.keyframes.len(), 2);
        // The first keyframe hosts its own points; later ones receive
        // warped points snapped to the pixel grid.
        assert!((out.keyframes[0].factor - 1.0).abs() < 1e-12);
        for kf in &out.keyframes {
            assert!((kf.factor - 1.0).abs() < 1e-3, "{}", kf.factor);
            assert!(kf.pcd_cor > 99.9, "{}", kf.pcd_cor);
            assert!(kf.pcd_dense > 99.0, "{}", kf.pcd_dense);
        }
        assert!(out.report.get("ate_rmse_m").unwrap() < 1e-9);
    }

    #[test]
    fn scale_bias_is_undone() {
        let mut cfg = small("box_room");
        cfg.noise.global_scale = 1.5;
        let out = process(&cfg).unwrap();
        for kf in &out.keyframes {
            assert!((kf.factor * 1.5 - 1.0).abs() < 0.01, "{}", kf.factor);
            assert!(kf.pcd_cor > 95.0);
            assert!(kf.pcd_prior < 1.0);
        }
    }

    #[test]
    fn camera_path_starts_at_viewpoint() {
        let v = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(synthetic_camera_pose(&v, 0, 30), v);
        assert_eq!(keyframe_indices(30, 10), vec![0, 10, 20]);
        assert_eq!(keyframe_indices(5, 10), vec![0]);
    }

    #[test]
    fn unknown_scene_and_missing_sequence_fail() {
        assert!(process(&small("no_such_scene")).is_err());
        let cfg = PipelineConfig {
            input: InputSource::Tum(PathBuf::from("/definitely/missing")),
            ..PipelineConfig::default()
        };
        assert!(process(&cfg).is_err());
    }
}
