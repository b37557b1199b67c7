use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use normfill::config::InputSource;
use normfill::io::{export_ply, read_color_png, read_depth_png, read_trajectory, write_color_png, write_depth_png, MetricReport, DEPTH_PNG_SCALE};
use normfill::metrics::{ate, pcd, AlignMode};
use normfill::synth::{corrupt_depth, fixture, render, NoiseSpec, PlanarScene, FIXTURE_NAMES};
use normfill::{CameraIntrinsics, Error, PipelineConfig, Pose, Result};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Normal-guided sparse-to-dense depth completion.
#[derive(Parser, Debug)]
#[command(name = "normfill", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write scene fixtures with their rendered color, depth and noisy prior.
    Synth(SynthArgs),
    /// Run the reconstruction pipeline on a synthetic scene or a TUM sequence.
    Densify(DensifyArgs),
    /// Absolute trajectory error between two TUM trajectory files.
    EvalAte(EvalAteArgs),
    /// Percentage of correct depth between two depth PNGs.
    EvalPcd(EvalPcdArgs),
    /// Convert a depth PNG and its color image to an ASCII PLY point cloud.
    ExportPly(ExportPlyArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct NoiseArgs {
    /// Multiplicative depth bias of the prior.
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Relative Gaussian depth noise of the prior.
    #[arg(long)]
    noise_gaussian: Option<f64>,
    /// Probability of dropping a prior pixel.
    #[arg(long)]
    noise_dropout: Option<f64>,
    /// Standard deviation of normal perturbations (radians).
    #[arg(long)]
    noise_normal_angle: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl NoiseArgs {
    fn apply(&self, spec: &mut NoiseSpec) {
        if let Some(v) = self.noise_scale {
            spec.global_scale = v;
        }
        if let Some(v) = self.noise_gaussian {
            spec.gaussian_rel = v;
        }
        if let Some(v) = self.noise_dropout {
            spec.dropout = v;
        }
        if let Some(v) = self.noise_normal_angle {
            spec.normal_angle_noise = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Fixture name or scene file; every fixture when omitted.
    #[arg(long)]
    scene: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args, Debug)]
struct DensifyArgs {
    /// Flat `key = value` config file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic input: fixture name or scene file.
    #[arg(long, conflicts_with = "tum")]
    scene: Option<String>,
    /// TUM RGB-D sequence directory.
    #[arg(long)]
    tum: Option<PathBuf>,
    /// Directory of depth PNG priors named like the sequence depth files.
    #[arg(long)]
    prior_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    keyframe_stride: Option<usize>,
    /// Normal agreement threshold of the coplanarity test.
    #[arg(long)]
    psi: Option<f64>,
    /// Window bound of the normal-guided filter (pixels).
    #[arg(long)]
    sigma: Option<usize>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Any other config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlignArg {
    None,
    Rigid,
    Sim3,
}

#[derive(Args, Debug)]
struct EvalAteArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "rigid")]
    align: AlignArg,
}

#[derive(Args, Debug)]
struct EvalPcdArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Args, Debug)]
struct ExportPlyArgs {
    /// 16-bit depth PNG (value / 5000 = meters).
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    color: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 250.0)]
    fx: f64,
    #[arg(long, default_value_t = 250.0)]
    fy: f64,
    /// Defaults to the image centre.
    #[arg(long)]
    cx: Option<f64>,
    /// Defaults to the image centre.
    #[arg(long)]
    cy: Option<f64>,
    /// Camera-to-world pose as 12 comma-separated numbers, row-major [R|t].
    #[arg(long, value_delimiter = ',', num_args = 12)]
    pose: Option<Vec<f64>>,
}

fn synth(args: &SynthArgs) -> Result<()> {
    let names: Vec<String> = if args.scene.is_empty() {
        FIXTURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.scene.clone()
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let k = normfill::synth::fixture_camera();
    let mut spec = NoiseSpec::none();
    args.noise.apply(&mut spec);
    for name in names {
        let (scene, stem) = match fixture(&name) {
            Some(s) => (s, name.clone()),
            None => {
                let path = Path::new(&name);
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scene".into());
                (PlanarScene::load(path)?, stem)
            }
        };
        let view = render(&scene, &scene.viewpoint, &k)?;
        scene.save(&args.out.join(format!("{stem}.scene")))?;
        write_color_png(&view.color, &args.out.join(format!("{stem}_color.png")))?;
        write_depth_png(&view.depth, &args.out.join(format!("{stem}_depth.png")), DEPTH_PNG_SCALE)?;
        let prior = corrupt_depth(&view.depth, &spec)?;
        write_depth_png(&prior, &args.out.join(format!("{stem}_prior.png")), DEPTH_PNG_SCALE)?;
        println!("wrote {stem}: {} planes, {} valid pixels", scene.planes.len(), view.depth.valid_count());
    }
    Ok(())
}

fn densify_config(args: &DensifyArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = &args.scene {
        cfg.input = InputSource::Synthetic(s.clone());
    }
    if let Some(d) = &args.tum {
        cfg.input = InputSource::Tum(d.clone());
    }
    if let Some(d) = &args.prior_dir {
        cfg.prior_dir = Some(d.clone());
    }
    if let Some(d) = &args.out {
        cfg.output_dir = d.clone();
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = args.frames {
        cfg.frames = v;
    }
    if let Some(v) = args.keyframe_stride {
        cfg.keyframe_stride = v;
    }
    if let Some(v) = args.psi {
        cfg.densify.filter.psi = v;
    }
    if let Some(v) = args.sigma {
        cfg.densify.filter.sigma = v;
    }
    args.noise.apply(&mut cfg.noise);
    let cli = Path::new("--set");
    for (i, kv) in args.overrides.iter().enumerate() {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse {
                path: cli.to_path_buf(),
                line: i + 1,
                message: format!("expected KEY=VALUE, got {kv:?}"),
            })?;
        cfg.set(key.trim(), value.trim(), cli, i + 1)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn densify(args: &DensifyArgs) -> Result<()> {
    let cfg = densify_config(args)?;
    let (out, files) = normfill::run_pipeline(&cfg)?;
    print!("{}", out.report.to_table());
    println!("wrote {} files to {}", files.written.len(), cfg.output_dir.display());
    Ok(())
}

fn eval_ate(args: &EvalAteArgs) -> Result<()> {
    let est = read_trajectory(&args.est)?;
    let gt = read_trajectory(&args.gt)?;
    let mode = match args.align {
        AlignArg::None => AlignMode::None,
        AlignArg::Rigid => AlignMode::Rigid,
        AlignArg::Sim3 => AlignMode::RigidScale,
    };
    let r = ate(&est, &gt, mode)?;
    let mut report = MetricReport::default();
    report.push("ate_rmse_m", r.rmse);
    report.push("pairs", r.pairs as f64);
    report.push("scale", r.alignment.scale);
    print!("{}", report.to_key_values());
    Ok(())
}

fn eval_pcd(args: &EvalPcdArgs) -> Result<()> {
    let est = read_depth_png(&args.est, DEPTH_PNG_SCALE)?;
    let gt = read_depth_png(&args.gt, DEPTH_PNG_SCALE)?;
    let mut report = MetricReport::default();
    report.push("pcd", pcd(&est, &gt)?);
    report.push("valid_gt", gt.valid_count() as f64);
    print!("{}", report.to_key_values());
    Ok(())
}

fn export(args: &ExportPlyArgs) -> Result<()> {
    let depth = read_depth_png(&args.depth, DEPTH_PNG_SCALE)?;
    let color = read_color_png(&args.color)?;
    let (w, h) = depth.dims();
    let k = CameraIntrinsics::new(
        args.fx,
        args.fy,
        args.cx.unwrap_or((w as f64 - 1.0) / 2.0),
        args.cy.unwrap_or((h as f64 - 1.0) / 2.0),
        w,
        h,
    )?;
    let pose = match &args.pose {
        Some(v) => {
            let m: [f64; 12] = v.as_slice().try_into().map_err(|_| Error::InvalidInput("pose needs 12 numbers".into()))?;
            Pose::from_row_major_3x4(&m)?
        }
        None => Pose::identity(),
    };
    export_ply(&depth, &color, &k, &pose, &args.out)?;
    println!("wrote {} vertices to {}", depth.valid_count(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Densify(a) => densify(a),
        Command::EvalAte(a) => eval_ate(a),
        Command::EvalPcd(a) => eval_pcd(a),
        Command::ExportPly(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let shown = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let msg = s.to_string();
                if !shown.contains(&msg) {
                    eprintln!("  caused by: {msg}");
                }
                source = s.source();
            }
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT })
        }
    }
}
