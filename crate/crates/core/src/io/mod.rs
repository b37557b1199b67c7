//! File formats: depth and color PNGs, PLY point clouds, TUM sequences and
//! trajectories, active-window text files and metric reports.

mod ply;
mod png;
mod report;
mod tum;
mod window;

pub use ply::{export_ply, read_ply, write_ply, PlyVertex};
pub use png::{
    dequantize_depth, quantize_depth, read_color_png, read_depth_png, write_color_png, write_depth_png,
    DEPTH_PNG_SCALE,
};
pub use report::MetricReport;
pub use tum::{
    format_trajectory, load_tum_sequence, parse_trajectory, read_trajectory, write_trajectory, TumFrame,
    TumSequence,
};
pub use window::{format_window, load_window, parse_window, save_window};
