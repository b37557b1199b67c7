//! Plain-text active-window files.
//!
//! Points: one `host_id u v z baseline_rel` per line.
//! Poses: one `host_id r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2` per
//! line, each the transform from the host keyframe into the new keyframe.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::scale::{ActiveWindow, KeyframeId, MaturePoint};

fn fields(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

fn parse_id(tok: &str, path: &Path, line: usize) -> Result<KeyframeId> {
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("bad keyframe id {tok:?}")))
}

fn parse_nums(toks: &[&str], path: &Path, line: usize) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad number {t:?}")))
        })
        .collect()
}

pub fn parse_window(points_text: &str, points_path: &Path, poses_text: &str, poses_path: &Path) -> Result<ActiveWindow> {
    let mut keyframes = Vec::new();
    for (line, toks) in fields(poses_text) {
        if toks.len() != 13 {
            return Err(Error::parse(poses_path, line, format!("expected 13 fields, found {}", toks.len())));
        }
        let id = parse_id(toks[0], poses_path, line)?;
        let m: [f64; 12] = parse_nums(&toks[1..], poses_path, line)?.try_into().expect("12 numbers");
        let pose = Pose::from_row_major_3x4(&m).map_err(|e| Error::parse(poses_path, line, e.to_string()))?;
        keyframes.push((id, pose));
    }
    let mut points = Vec::new();
    for (line, toks) in fields(points_text) {
        if toks.len() != 5 {
            return Err(Error::parse(points_path, line, format!("expected 5 fields, found {}", toks.len())));
        }
        let host = parse_id(toks[0], points_path, line)?;
        let v = parse_nums(&toks[1..], points_path, line)?;
        points.push(MaturePoint {
            host,
            u: v[0],
            v: v[1],
            z: v[2],
            baseline_rel: v[3],
        });
    }
    ActiveWindow::new(keyframes, points).map_err(|e| Error::parse(points_path, 0, e.to_string()))
}

pub fn load_window(points_path: &Path, poses_path: &Path) -> Result<ActiveWindow> {
    let points = std::fs::read_to_string(points_path).map_err(|e| Error::io(points_path, e))?;
    let poses = std::fs::read_to_string(poses_path).map_err(|e| Error::io(poses_path, e))?;
    parse_window(&points, points_path, &poses, poses_path)
}

/// Returns `(points_text, poses_text)`.
pub fn format_window(window: &ActiveWindow) -> (String, String) {
    let mut points = String::from("# host_id u v z baseline_rel\n");
    for p in window.points() {
        writeln!(points, "{} {} {} {} {}", p.host, p.u, p.v, p.z, p.baseline_rel).unwrap();
    }
    let mut poses = String::from("# host_id 3x4 row-major host-to-new transform\n");
    for (id, pose) in window.keyframes() {
        write!(poses, "{id}").unwrap();
        for v in pose.to_row_major_3x4() {
            write!(poses, " {v}").unwrap();
        }
        poses.push('\n');
    }
    (points, poses)
}

pub fn save_window(window: &ActiveWindow, points_path: &Path, poses_path: &Path) -> Result<()> {
    let (points, poses) = format_window(window);
    std::fs::write(points_path, points).map_err(|e| Error::io(points_path, e))?;
    std::fs::write(poses_path, poses).map_err(|e| Error::io(poses_path, e))
}
