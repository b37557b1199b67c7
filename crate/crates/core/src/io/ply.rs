use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{check_dims, CameraIntrinsics, ColorImage, DepthImage, Pose};

/// Writes one ASCII PLY vertex per valid depth pixel, in the world frame of
/// `pose` (camera-to-world), colored from `color`.
pub fn write_ply(
    out: impl Write,
    depth: &DepthImage,
    color: &ColorImage,
    k: &CameraIntrinsics,
    pose: &Pose,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", depth.valid_count())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property float {axis}")?;
    }
    for channel in ["red", "green", "blue"] {
        writeln!(w, "property uchar {channel}")?;
    }
    writeln!(w, "end_header")?;
    for (x, y, z) in depth.iter_valid() {
        let p = pose.transform_point(&k.unproject_unchecked(x as f64, y as f64, z));
        let [r, g, b] = color.get(x, y);
        writeln!(w, "{} {} {} {r} {g} {b}", p.x as f32, p.y as f32, p.z as f32)?;
    }
    w.flush()
}

pub fn export_ply(
    depth: &DepthImage,
    color: &ColorImage,
    k: &CameraIntrinsics,
    pose: &Pose,
    path: &Path,
) -> Result<()> {
    check_dims(depth.dims(), color.dims())?;
    check_dims(depth.dims(), k.dims())?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(file, depth, color, k, pose).map_err(|e| Error::io(path, e))
}

/// A colored point read back from a PLY file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlyVertex {
    pub position: Vector3<f64>,
    pub color: [u8; 3],
}

/// Reads the ASCII PLY files written by [`export_ply`].
pub fn read_ply(path: &Path) -> Result<Vec<PlyVertex>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut count = None;
    for (i, line) in lines.by_ref() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if i == 0 && line != "ply" {
            return Err(Error::parse(path, 1, "missing ply magic"));
        }
        if let Some(n) = line.strip_prefix("element vertex ") {
            count = Some(n.trim().parse::<usize>().map_err(|_| Error::parse(path, i + 1, "bad vertex count"))?);
        }
        if line == "end_header" {
            break;
        }
    }
    let count = count.ok_or_else(|| Error::parse(path, 0, "missing vertex element"))?;
    let mut out = Vec::with_capacity(count);
    for (i, line) in lines.take(count) {
        let line = line.map_err(|e| Error::io(path, e))?;
        let bad = || Error::parse(path, i + 1, "malformed vertex line");
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad());
        }
        let mut pos = [0.0; 3];
        for (p, f) in pos.iter_mut().zip(&fields[..3]) {
            *p = f.parse().map_err(|_| bad())?;
        }
        let mut color = [0u8; 3];
        for (c, f) in color.iter_mut().zip(&fields[3..]) {
            *c = f.parse().map_err(|_| bad())?;
        }
        out.push(PlyVertex {
            position: Vector3::from(pos),
            color,
        });
    }
    if out.len() != count {
        return Err(Error::parse(path, 0, format!("expected {count} vertices, found {}", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(10.0, 10.0, 2.0, 1.0, 5, 3).unwrap()
    }

    #[test]
    fn empty_depth_gives_zero_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.ply");
        let color = ColorImage::constant(5, 3, [1, 2, 3]);
        export_ply(&DepthImage::invalid(5, 3), &color, &k(), &Pose::identity(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("element vertex 0\n"));
        assert!(read_ply(&path).unwrap().is_empty());
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ply");
        let mut d = DepthImage::invalid(5, 3);
        d.set(2, 1, Some(1.0));
        let color = ColorImage::constant(5, 3, [10, 20, 30]);
        export_ply(&d, &color, &k(), &Pose::identity(), &path).unwrap();
        let v = read_ply(&path).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(v[0].color, [10, 20, 30]);
    }

    #[test]
    fn pose_moves_points_to_world() {
        let mut buf = Vec::new();
        let mut d = DepthImage::invalid(5, 3);
        d.set(2, 1, Some(2.0));
        let pose = Pose::from_translation(Vector3::new(1.0, -1.0, 0.5));
        write_ply(&mut buf, &d, &ColorImage::constant(5, 3, [0; 3]), &k(), &pose).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("end_header\n1 -1 2.5 0 0 0\n"));
    }

    #[test]
    fn mismatched_color_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let res = export_ply(
            &DepthImage::invalid(5, 3),
            &ColorImage::constant(4, 3, [0; 3]),
            &k(),
            &Pose::identity(),
            &dir.path().join("x.ply"),
        );
        assert!(res.is_err());
    }
}
