//! Sparse-to-dense depth completion guided by surface normals.
//!
//! The crate turns a learned (or synthetic) depth prior plus a handful of
//! metrically accurate sparse points into a dense, scale-corrected depth map,
//! then refines it across keyframes with a per-pixel Bayesian filter.

pub mod config;
pub mod densify;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod scale;
pub mod synth;

pub use densify::{
    normal_guided_filter, sparse_to_dense, BilateralParams, DensifyParams, FilterParams, SuperpixelLabels,
    SuperpixelParams,
};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, ColorImage, DepthImage, DisparityImage, NormalImage, Pose};
pub use metrics::Trajectory;
pub use pipeline::{process, run_pipeline};
