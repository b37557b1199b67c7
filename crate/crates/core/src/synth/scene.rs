use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Pose;

const UNIT_TOLERANCE: f64 = 1e-6;
const ON_PLANE_TOLERANCE: f64 = 1e-6;

/// A flat polygon `{x : n . x = offset}` with a uniform color.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    normal: Vector3<f64>,
    offset: f64,
    polygon: Vec<Vector3<f64>>,
    color: [u8; 3],
    // In-plane basis used for the point-in-polygon test.
    axes: [Vector3<f64>; 2],
    outline: Vec<[f64; 2]>,
}

impl Plane {
    /// The normal must be unit length (within 1e-6; it is renormalized), the
    /// polygon must have at least three vertices lying on the plane and a
    /// non-zero area.
    pub fn new(normal: Vector3<f64>, offset: f64, polygon: Vec<Vector3<f64>>, color: [u8; 3]) -> Result<Self> {
        let len = normal.norm();
        if !len.is_finite() || (len - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid(format!("plane normal has length {len}, expected 1")));
        }
        if !offset.is_finite() {
            return Err(Error::invalid("plane offset must be finite"));
        }
        let normal = normal / len;
        if polygon.len() < 3 {
            return Err(Error::invalid("plane polygon needs at least three vertices"));
        }
        for p in &polygon {
            let dist = normal.dot(p) - offset;
            if !dist.is_finite() || dist.abs() > ON_PLANE_TOLERANCE {
                return Err(Error::invalid(format!(
                    "polygon vertex ({}, {}, {}) is {dist} off its plane",
                    p.x, p.y, p.z
                )));
            }
        }
        let helper = if normal.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = normal.cross(&helper).normalize();
        let e2 = normal.cross(&e1);
        let outline: Vec<[f64; 2]> = polygon.iter().map(|p| [e1.dot(p), e2.dot(p)]).collect();
        let area2: f64 = (0..outline.len())
            .map(|i| {
                let a = outline[i];
                let b = outline[(i + 1) % outline.len()];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        if area2.abs() < 1e-12 {
            return Err(Error::invalid("plane polygon is degenerate"));
        }
        Ok(Self {
            normal,
            offset,
            polygon,
            color,
            axes: [e1, e2],
            outline,
        })
    }

    /// Axis-aligned rectangle on the plane `axis = value`, spanning the two
    /// remaining axes over `lo..hi`.
    pub fn axis_rect(axis: usize, value: f64, lo: [f64; 2], hi: [f64; 2], color: [u8; 3]) -> Result<Self> {
        assert!(axis < 3, "axis index out of range");
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let corner = |s: f64, t: f64| {
            let mut p = Vector3::zeros();
            p[axis] = value;
            p[a] = s;
            p[b] = t;
            p
        };
        let polygon = vec![
            corner(lo[0], lo[1]),
            corner(hi[0], lo[1]),
            corner(hi[0], hi[1]),
            corner(lo[0], hi[1]),
        ];
        let mut normal = Vector3::zeros();
        normal[axis] = 1.0;
        Self::new(normal, value, polygon, color)
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn polygon(&self) -> &[Vector3<f64>] {
        &self.polygon
    }

    pub fn color(&self) -> [u8; 3] {
        self.color
    }

    /// Whether a point on the plane lies inside the polygon (even-odd rule).
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let (px, py) = (self.axes[0].dot(p), self.axes[1].dot(p));
        let n = self.outline.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let [xi, yi] = self.outline[i];
            let [xj, yj] = self.outline[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

/// Axis-aligned bounding box in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Extent {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        if (0..3).any(|i| !(min[i] < max[i]) || !min[i].is_finite() || !max[i].is_finite()) {
            return Err(Error::invalid("extent minimum must be below its maximum on every axis"));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Piecewise-planar world with a default camera viewpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarScene {
    pub planes: Vec<Plane>,
    pub extent: Extent,
    /// Camera-to-world pose the fixture is meant to be viewed from.
    pub viewpoint: Pose,
}

impl PlanarScene {
    pub fn new(planes: Vec<Plane>, extent: Extent, viewpoint: Pose) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::invalid("scene has no planes"));
        }
        Ok(Self {
            planes,
            extent,
            viewpoint,
        })
    }

    /// Text form: `#` comments, one `extent` line, an optional `view` line
    /// with a row-major 3x4 camera-to-world matrix, and one line per plane:
    /// `nx ny nz d  x1 y1 z1 ... xk yk zk  r g b`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (lo, hi) = (self.extent.min, self.extent.max);
        writeln!(s, "extent {} {} {} {} {} {}", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z).unwrap();
        s.push_str("view");
        for v in self.viewpoint.to_row_major_3x4() {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
        for p in &self.planes {
            let n = p.normal;
            write!(s, "{} {} {} {}", n.x, n.y, n.z, p.offset).unwrap();
            for v in &p.polygon {
                write!(s, "  {} {} {}", v.x, v.y, v.z).unwrap();
            }
            let [r, g, b] = p.color;
            writeln!(s, "  {r} {g} {b}").unwrap();
        }
        s
    }

    /// Parses [`PlanarScene::to_text`] output. `path` is only used in errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut planes = Vec::new();
        let mut extent = None;
        let mut viewpoint = Pose::identity();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(path, line_no, m);
            let mut tokens = line.split_whitespace().peekable();
            let keyword = match tokens.peek() {
                Some(&"extent") | Some(&"view") => tokens.next(),
                _ => None,
            };
            let nums: Vec<f64> = tokens
                .map(|t| t.parse::<f64>().map_err(|_| err(format!("not a number: {t:?}"))))
                .collect::<Result<_>>()?;
            match keyword {
                Some("extent") => {
                    if nums.len() != 6 {
                        return Err(err(format!("extent needs 6 numbers, found {}", nums.len())));
                    }
                    let e = Extent::new(
                        Vector3::new(nums[0], nums[1], nums[2]),
                        Vector3::new(nums[3], nums[4], nums[5]),
                    )
                    .map_err(|e| err(e.to_string()))?;
                    extent = Some(e);
                }
                Some(_) => {
                    let m: [f64; 12] = nums
                        .as_slice()
                        .try_into()
                        .map_err(|_| err(format!("view needs 12 numbers, found {}", nums.len())))?;
                    viewpoint = Pose::from_row_major_3x4(&m).map_err(|e| err(e.to_string()))?;
                }
                None => {
                    if nums.len() < 16 || !(nums.len() - 7).is_multiple_of(3) {
                        return Err(err(format!(
                            "plane line needs 4 + 3k (k >= 3) + 3 numbers, found {}",
                            nums.len()
                        )));
                    }
                    let color_at = nums.len() - 3;
                    let mut color = [0u8; 3];
                    for (c, &v) in color.iter_mut().zip(&nums[color_at..]) {
                        if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                            return Err(err(format!("color component {v} is not an integer in 0..=255")));
                        }
                        *c = v as u8;
                    }
                    let polygon = nums[4..color_at]
                        .chunks_exact(3)
                        .map(|c| Vector3::new(c[0], c[1], c[2]))
                        .collect();
                    let plane = Plane::new(Vector3::new(nums[0], nums[1], nums[2]), nums[3], polygon, color)
                        .map_err(|e| err(e.to_string()))?;
                    planes.push(plane);
                }
            }
        }
        let extent = extent.ok_or_else(|| Error::parse(path, 0, "missing extent line"))?;
        Self::new(planes, extent, viewpoint).map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
