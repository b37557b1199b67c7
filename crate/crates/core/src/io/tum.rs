use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::png::{read_color_png, read_depth_png, DEPTH_PNG_SCALE};
use crate::error::{Error, Result};
use crate::geometry::{ColorImage, DepthImage, Pose};
use crate::metrics::{associate_timestamps, Trajectory, ASSOCIATION_WINDOW};

const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses `timestamp tx ty tz qx qy qz qw` lines. `path` is only used in errors.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let mut entries = Vec::new();
    for (line_no, line) in data_lines(text) {
        let err = |m: String| Error::parse(path, line_no, m);
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("not a number: {t:?}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", nums.len())));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let q = Quaternion::new(nums[7], nums[4], nums[5], nums[6]);
        let norm = q.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(err(format!("quaternion norm {norm} is not 1")));
        }
        let pose = Pose::from_unit_quaternion(
            &UnitQuaternion::from_quaternion(q),
            Vector3::new(nums[1], nums[2], nums[3]),
        );
        entries.push((nums[0], pose));
    }
    Trajectory::new(entries).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (t, pose) in traj.entries() {
        let q = UnitQuaternion::from_matrix(pose.rotation());
        let p = pose.translation();
        writeln!(
            s,
            "{t} {} {} {} {} {} {} {}",
            p.x, p.y, p.z, q.i, q.j, q.k, q.w
        )
        .unwrap();
    }
    s
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, format_trajectory(traj)).map_err(|e| Error::io(path, e))
}

/// One paired color/depth frame of a sequence; images are loaded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct TumFrame {
    pub timestamp: f64,
    pub rgb_path: PathBuf,
    pub depth_path: PathBuf,
}

impl TumFrame {
    pub fn load_color(&self) -> Result<ColorImage> {
        read_color_png(&self.rgb_path)
    }

    pub fn load_depth(&self) -> Result<DepthImage> {
        read_depth_png(&self.depth_path, DEPTH_PNG_SCALE)
    }
}

#[derive(Clone, Debug)]
pub struct TumSequence {
    pub root: PathBuf,
    pub frames: Vec<TumFrame>,
    pub groundtruth: Trajectory,
}

/// Lists `(timestamp, path)` for one image stream, preferring the
/// `<name>.txt` index and falling back to the `<name>/` file names.
fn list_stream(root: &Path, name: &str) -> Result<Vec<(f64, PathBuf)>> {
    let index = root.join(format!("{name}.txt"));
    let dir = root.join(name);
    if !dir.is_dir() {
        return Err(Error::io(&dir, std::io::Error::new(std::io::ErrorKind::NotFound, "missing image directory")));
    }
    let mut out = Vec::new();
    if index.is_file() {
        let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
        for (line_no, line) in data_lines(&text) {
            let mut fields = line.split_whitespace();
            let (Some(ts), Some(file), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(&index, line_no, "expected `timestamp filename`"));
            };
            let ts: f64 = ts
                .parse()
                .map_err(|_| Error::parse(&index, line_no, format!("bad timestamp {ts:?}")))?;
            out.push((ts, root.join(file)));
        }
    } else {
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("png") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let ts: f64 = stem.parse().map_err(|_| {
                Error::parse(&path, 0, "image file name is not a timestamp")
            })?;
            out.push((ts, path));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(out)
}

/// Loads a TUM RGB-D style directory: `rgb/`, `depth/` and
/// `groundtruth.txt`. Color and depth frames are paired by nearest
/// timestamp within 20 ms.
pub fn load_tum_sequence(root: &Path) -> Result<TumSequence> {
    if !root.is_dir() {
        return Err(Error::io(root, std::io::Error::new(std::io::ErrorKind::NotFound, "sequence directory not found")));
    }
    let rgb = list_stream(root, "rgb")?;
    let depth = list_stream(root, "depth")?;
    let groundtruth = read_trajectory(&root.join("groundtruth.txt"))?;
    let rgb_ts: Vec<f64> = rgb.iter().map(|r| r.0).collect();
    let depth_ts: Vec<f64> = depth.iter().map(|d| d.0).collect();
    let frames = associate_timestamps(&rgb_ts, &depth_ts, ASSOCIATION_WINDOW)
        .into_iter()
        .map(|(i, j)| TumFrame {
            timestamp: rgb[i].0,
            rgb_path: rgb[i].1.clone(),
            depth_path: depth[j].1.clone(),
        })
        .collect();
    Ok(TumSequence {
        root: root.to_path_buf(),
        frames,
        groundtruth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{write_color_png, write_depth_png};

    #[test]
    fn identity_quaternion_gives_identity_rotation() {
        let t = parse_trajectory("# comment\n1.5 1 2 3 0 0 0 1\n", Path::new("gt.txt")).unwrap();
        let (ts, pose) = t.entries()[0];
        assert_eq!(ts, 1.5);
        assert_eq!(*pose.rotation(), nalgebra::Matrix3::identity());
        assert_eq!(*pose.translation(), Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let cases = [
            "1 0 0 0 0 0 0 1\n2 0 0 0 0 0 0\n",
            "1 0 0 0 0 0 0 1\n\n2 0 0 x 0 0 0 1\n",
            "# c\n1 0 0 0 0 0 0.1 1\n",
        ];
        for (text, expected) in cases.iter().zip([2, 3, 2]) {
            match parse_trajectory(text, Path::new("gt.txt")) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        // Slightly off-unit quaternions within tolerance are accepted.
        assert!(parse_trajectory("1 0 0 0 0 0 0 1.0005\n", Path::new("gt.txt")).is_ok());
    }

    #[test]
    fn trajectory_text_round_trip() {
        let entries = (0..5)
            .map(|i| {
                let a = 0.1 * i as f64;
                (10.0 + i as f64 * 0.033, Pose::from_axis_angle(Vector3::new(1.0, 2.0, 0.5), a, Vector3::new(a, -a, 2.0 * a)))
            })
            .collect();
        let traj = Trajectory::new(entries).unwrap();
        let back = parse_trajectory(&format_trajectory(&traj), Path::new("t.txt")).unwrap();
        for ((ta, pa), (tb, pb)) in traj.entries().iter().zip(back.entries()) {
            assert_eq!(ta, tb);
            assert!((pa.rotation() - pb.rotation()).amax() < 1e-12);
            assert_eq!(pa.translation(), pb.translation());
        }
    }

    #[test]
    fn loads_a_sequence_directory() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir(root.join("rgb")).unwrap();
        std::fs::create_dir(root.join("depth")).unwrap();
        let color = ColorImage::constant(4, 3, [1, 2, 3]);
        let depth = DepthImage::constant(4, 3, 1.0);
        for (c, d) in [(0.0, 0.01), (0.5, 0.49), (1.0, 1.5)] {
            write_color_png(&color, &root.join(format!("rgb/{c:.6}.png"))).unwrap();
            write_depth_png(&depth, &root.join(format!("depth/{d:.6}.png")), DEPTH_PNG_SCALE).unwrap();
        }
        std::fs::write(root.join("groundtruth.txt"), "0 0 0 0 0 0 0 1\n1 1 0 0 0 0 0 1\n").unwrap();
        let seq = load_tum_sequence(root).unwrap();
        assert_eq!(seq.frames.len(), 2);
        assert_eq!(seq.frames[1].timestamp, 0.5);
        assert_eq!(seq.frames[0].load_depth().unwrap(), depth);
        assert_eq!(seq.frames[0].load_color().unwrap(), color);
        assert_eq!(seq.groundtruth.len(), 2);
    }

    #[test]
    fn missing_pieces_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_tum_sequence(&dir.path().join("nope")).is_err());
        std::fs::create_dir(dir.path().join("rgb")).unwrap();
        assert!(load_tum_sequence(dir.path()).is_err());
        std::fs::create_dir(dir.path().join("depth")).unwrap();
        assert!(matches!(load_tum_sequence(dir.path()), Err(Error::Io { .. })));
    }
}
