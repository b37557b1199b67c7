//! SLIC superpixels: k-means over (L, a, b, x, y) from a regular grid,
//! followed by connectivity enforcement so every label is one 4-connected
//! region.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::ColorImage;

const ITERATIONS: usize = 10;

/// Per-pixel superpixel label in `0..count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpixelLabels {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl SuperpixelLabels {
    /// Wraps raw labels, compacting them to `0..count`.
    pub fn from_raw(width: usize, height: usize, raw: Vec<u32>) -> Result<Self> {
        if raw.len() != width * height {
            return Err(Error::invalid(format!(
                "{} labels for a {}x{} image",
                raw.len(),
                width,
                height
            )));
        }
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .into_iter()
            .map(|l| {
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
            .collect();
        Ok(Self {
            width,
            height,
            labels,
            count: map.len(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// Pixel indices of every label, each list in raster order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    /// True when every label forms a single 4-connected region.
    pub fn is_connected(&self) -> bool {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut label_seen = vec![false; self.count];
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if seen[start] {
                continue;
            }
            let l = self.labels[start];
            if label_seen[l as usize] {
                return false;
            }
            label_seen[l as usize] = true;
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for j in neighbors4(i, w, h) {
                    if !seen[j] && self.labels[j] == l {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuperpixelParams {
    /// Target superpixel side length (pixels).
    pub region_size: usize,
    /// Weight of spatial proximity relative to color similarity.
    pub compactness: f64,
}

impl Default for SuperpixelParams {
    fn default() -> Self {
        Self {
            region_size: 16,
            compactness: 10.0,
        }
    }
}

#[inline]
fn neighbors4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    let left = (x > 0).then(|| i - 1);
    let right = (x + 1 < w).then(|| i + 1);
    let up = (y > 0).then(|| i - w);
    let down = (y + 1 < h).then(|| i + w);
    [left, right, up, down].into_iter().flatten()
}

fn srgb_to_linear(c: u8) -> f64 {
    let c = f64::from(c) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// CIE L*a*b* (D65 white point) of an 8-bit sRGB color.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.950_47;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.088_83;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[derive(Clone, Copy, Debug)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

#[inline]
fn lab_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Segments `img` into roughly `region_size x region_size` superpixels.
///
/// Deterministic: grid seeding, a fixed number of k-means iterations, and
/// ties broken towards the lower center index.
pub fn superpixel_segment(img: &ColorImage, params: &SuperpixelParams) -> Result<SuperpixelLabels> {
    let (w, h) = img.dims();
    if w == 0 || h == 0 {
        return Err(Error::invalid("cannot segment an empty image"));
    }
    if params.region_size == 0 {
        return Err(Error::invalid("superpixel region size must be at least 1"));
    }
    if !(params.compactness >= 0.0 && params.compactness.is_finite()) {
        return Err(Error::invalid("superpixel compactness must be non-negative"));
    }

    let lab: Vec<[f64; 3]> = img.pixels().iter().map(|&c| rgb_to_lab(c)).collect();
    let s = params.region_size as f64;
    let nx = ((w as f64 / s).round() as usize).max(1);
    let ny = ((h as f64 / s).round() as usize).max(1);
    let step_x = w as f64 / nx as f64;
    let step_y = h as f64 / ny as f64;

    let grad = |x: usize, y: usize| -> f64 {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return f64::INFINITY;
        }
        let i = y * w + x;
        lab_dist2(&lab[i + 1], &lab[i - 1]) + lab_dist2(&lab[i + w], &lab[i - w])
    };

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let gx = (((i as f64 + 0.5) * step_x) as usize).min(w - 1);
            let gy = (((j as f64 + 0.5) * step_y) as usize).min(h - 1);
            // Move the seed off edges: lowest gradient in the 3x3 neighborhood.
            let (mut bx, mut by, mut bg) = (gx, gy, grad(gx, gy));
            for yy in gy.saturating_sub(1)..=(gy + 1).min(h - 1) {
                for xx in gx.saturating_sub(1)..=(gx + 1).min(w - 1) {
                    let g = grad(xx, yy);
                    if g < bg {
                        (bx, by, bg) = (xx, yy, g);
                    }
                }
            }
            centers.push(Center {
                lab: lab[by * w + bx],
                x: bx as f64,
                y: by as f64,
            });
        }
    }

    let spatial_weight = (params.compactness / s).powi(2);
    let radius = (s.max(step_x).max(step_y)).ceil() as isize;
    let mut assign = vec![u32::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];

    for _ in 0..ITERATIONS {
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let cx = c.x.round() as isize;
            let cy = c.y.round() as isize;
            let x0 = (cx - radius).max(0) as usize;
            let x1 = (cx + radius).min(w as isize - 1) as usize;
            let y0 = (cy - radius).max(0) as usize;
            let y1 = (cy + radius).min(h as isize - 1) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let ds2 = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = lab_dist2(&lab[i], &c.lab) + ds2 * spatial_weight;
                    if d < dist[i] {
                        dist[i] = d;
                        assign[i] = ci as u32;
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (i, &a) in assign.iter().enumerate() {
            if a == u32::MAX {
                continue;
            }
            let s = &mut sums[a as usize];
            s[0] += lab[i][0];
            s[1] += lab[i][1];
            s[2] += lab[i][2];
            s[3] += (i % w) as f64;
            s[4] += (i / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                let n = s[5];
                *c = Center {
                    lab: [s[0] / n, s[1] / n, s[2] / n],
                    x: s[3] / n,
                    y: s[4] / n,
                };
            }
        }
    }

    // Pixels outside every search window go to the nearest center in the image plane.
    for (i, a) in assign.iter_mut().enumerate() {
        if *a == u32::MAX {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let mut best = (f64::INFINITY, 0u32);
            for (ci, c) in centers.iter().enumerate() {
                let d = (x - c.x).powi(2) + (y - c.y).powi(2);
                if d < best.0 {
                    best = (d, ci as u32);
                }
            }
            *a = best.1;
        }
    }

    let min_size = ((params.region_size * params.region_size) / 4).max(1);
    Ok(enforce_connectivity(w, h, &assign, &lab, min_size))
}

struct Components {
    id: Vec<usize>,
    pixels: Vec<Vec<usize>>,
}

fn connected_components(w: usize, h: usize, assign: &[u32]) -> Components {
    let mut id = vec![usize::MAX; w * h];
    let mut pixels = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if id[start] != usize::MAX {
            continue;
        }
        let comp = pixels.len();
        let mut members = vec![start];
        id[start] = comp;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in neighbors4(i, w, h) {
                if id[j] == usize::MAX && assign[j] == assign[start] {
                    id[j] = comp;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        pixels.push(members);
    }
    Components { id, pixels }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Splits clusters into 4-connected components, then merges components
/// smaller than `min_size` into the adjacent region with the closest mean
/// color. Merging adjacent regions keeps every region connected.
fn enforce_connectivity(
    w: usize,
    h: usize,
    assign: &[u32],
    lab: &[[f64; 3]],
    min_size: usize,
) -> SuperpixelLabels {
    let comps = connected_components(w, h, assign);
    let n = comps.pixels.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = comps.pixels.iter().map(Vec::len).collect();
    let mut color_sum: Vec<[f64; 3]> = comps
        .pixels
        .iter()
        .map(|px| {
            px.iter().fold([0.0; 3], |acc, &i| {
                [acc[0] + lab[i][0], acc[1] + lab[i][1], acc[2] + lab[i][2]]
            })
        })
        .collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|c| vec![c]).collect();

    loop {
        let mut merged_any = false;
        for c in 0..n {
            if find(&mut parent, c) != c || size[c] >= min_size {
                continue;
            }
            let mean = color_sum[c].map(|v| v / size[c] as f64);
            let mut best: Option<(f64, usize)> = None;
            for &sub in &members[c] {
                for &i in &comps.pixels[sub] {
                    for j in neighbors4(i, w, h) {
                        let r = find(&mut parent, comps.id[j]);
                        if r == c {
                            continue;
                        }
                        let other = color_sum[r].map(|v| v / size[r] as f64);
                        let d = lab_dist2(&mean, &other);
                        let better = match best {
                            None => true,
                            Some((bd, br)) => d < bd || (d == bd && r < br),
                        };
                        if better {
                            best = Some((d, r));
                        }
                    }
                }
            }
            if let Some((_, r)) = best {
                parent[c] = r;
                size[r] += size[c];
                for k in 0..3 {
                    color_sum[r][k] += color_sum[c][k];
                }
                let moved = std::mem::take(&mut members[c]);
                members[r].extend(moved);
                merged_any = true;
            }
        }
        if !merged_any {
            break;
        }
    }

    let mut root_label = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        let r = find(&mut parent, comps.id[i]);
        if root_label[r] == u32::MAX {
            root_label[r] = next;
            next += 1;
        }
        labels[i] = root_label[r];
    }
    SuperpixelLabels {
        width: w,
        height: h,
        labels,
        count: next as usize,
    }
}
