//! Light-field superpixels (LFSPs).
//!
//! An LFSP is the set of rays leaving one small scene region, so it has one
//! slice per view and every slice looks alike. Clustering runs in two
//! stages:
//!
//! 1. The central view is clustered SLIC-style in (CIELab, position,
//!    disparity) space, then every cluster is made 4-connected.
//! 2. Each central pixel is projected into every other view along its
//!    disparity, carrying its superpixel id. Where two pixels land on the
//!    same spot the nearer (larger disparity) one wins. Pixels nothing lands
//!    on (disocclusions, frame borders) take the id of the bordering
//!    superpixel closest in color and projected position.
//!
//! This is the only clustering backend in the crate; anything that produces
//! an [`LfspSegmentation`] with view-coherent slices can replace it.

mod connectivity;
pub mod features;
pub mod scribble;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disparity::DisparityMap;
use crate::error::{Error, Result};
use crate::lightfield::{Geometry, LightField};

pub use features::{init_features, LfspFeature, SliceStats};
pub use scribble::{propagate_scribbles, ScribbleMap, SeedSet, Stroke, Strokes};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LfspParams {
    /// Nominal superpixel edge length `M`, in pixels.
    pub size: usize,
    pub compactness: f64,
    /// Weight of the confidence-scaled disparity distance.
    pub disparity_weight: f64,
    pub max_iterations: usize,
    /// Clustering stops once no center moves farther than this (pixels).
    pub convergence: f64,
}

impl Default for LfspParams {
    fn default() -> Self {
        Self {
            size: 20,
            compactness: 10.0,
            disparity_weight: 10.0,
            max_iterations: 10,
            convergence: 0.5,
        }
    }
}

/// Assignment of every ray to exactly one superpixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfspSegmentation {
    geometry: Geometry,
    assignment: Vec<u32>,
    count: usize,
    size: usize,
}

impl LfspSegmentation {
    /// Wraps a ray-major assignment; ids must be dense in `0..count`.
    pub fn from_assignment(geometry: Geometry, assignment: Vec<u32>, size: usize) -> Result<Self> {
        if assignment.len() != geometry.ray_count() {
            return Err(Error::DimensionMismatch(format!(
                "assignment has {} rays, geometry has {}",
                assignment.len(),
                geometry.ray_count()
            )));
        }
        if assignment.contains(&NONE) {
            return Err(Error::InvalidInput("some rays are unassigned".into()));
        }
        let count = assignment.iter().copied().max().map_or(0, |m| m as usize + 1);
        Ok(Self {
            geometry,
            assignment,
            count,
            size,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Nominal superpixel size `M`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn view(&self, view: usize) -> &[u32] {
        let n = self.geometry.pixels_per_view();
        &self.assignment[view * n..(view + 1) * n]
    }

    pub fn central(&self) -> &[u32] {
        self.view(self.geometry.central_view())
    }
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
    d: f64,
}

#[inline]
fn lab_distance(a: [f32; 3], b: [f64; 3]) -> f64 {
    let dl = a[0] as f64 - b[0];
    let da = a[1] as f64 - b[1];
    let db = a[2] as f64 - b[2];
    (dl * dl + da * da + db * db).sqrt()
}

fn gradient(lab: &[[f32; 3]], w: usize, h: usize, x: usize, y: usize) -> f64 {
    let at = |xx: usize, yy: usize| lab[yy * w + xx];
    let diff2 = |a: [f32; 3], b: [f32; 3]| {
        (0..3).map(|c| ((a[c] - b[c]) as f64).powi(2)).sum::<f64>()
    };
    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
    diff2(at(xr, y), at(xl, y)) + diff2(at(x, yd), at(x, yu))
}

/// Clusters the central view, returning a raw (possibly disconnected)
/// cluster map.
fn cluster_central(
    lf: &LightField,
    disp: &DisparityMap,
    params: &LfspParams,
) -> Vec<u32> {
    let g = lf.geometry();
    let (w, h) = (g.width, g.height);
    let lab = lf.central_lab();
    let m = params.size as f64;

    let nx = ((w as f64 / m).round() as usize).max(1);
    let ny = ((h as f64 / m).round() as usize).max(1);
    let (sx, sy) = (w as f64 / nx as f64, h as f64 / ny as f64);
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut x = (i as f64 + 0.5) * sx - 0.5;
            let mut y = (j as f64 + 0.5) * sy - 0.5;
            let px = (x.round() as usize).min(w - 1);
            let py = (y.round() as usize).min(h - 1);
            let mut best = (gradient(lab, w, h, px, py), px, py);
            for yy in py.saturating_sub(1)..=(py + 1).min(h - 1) {
                for xx in px.saturating_sub(1)..=(px + 1).min(w - 1) {
                    let gr = gradient(lab, w, h, xx, yy);
                    if gr < best.0 {
                        best = (gr, xx, yy);
                    }
                }
            }
            if (best.1, best.2) != (px, py) {
                x = best.1 as f64;
                y = best.2 as f64;
            }
            let p = best.2 * w + best.1;
            let c = lab[p];
            centers.push(Center {
                lab: [c[0] as f64, c[1] as f64, c[2] as f64],
                x,
                y,
                d: disp.values[p] as f64,
            });
        }
    }

    let mut labels = vec![NONE; w * h];
    let mut dist = vec![f64::INFINITY; w * h];
    for _ in 0..params.max_iterations.max(1) {
        dist.fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let x_lo = (c.x - m).floor().max(0.0) as usize;
            let y_lo = (c.y - m).floor().max(0.0) as usize;
            let x_hi = ((c.x + m).ceil() as usize).min(w - 1);
            let y_hi = ((c.y + m).ceil() as usize).min(h - 1);
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let p = y * w + x;
                    let dxy = ((x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2)).sqrt();
                    let dd = (disp.values[p] as f64 - c.d).abs() * disp.confidence[p] as f64;
                    let dist_p = lab_distance(lab[p], c.lab)
                        + params.compactness * dxy / m
                        + params.disparity_weight * dd;
                    if dist_p < dist[p] {
                        dist[p] = dist_p;
                        labels[p] = k as u32;
                    }
                }
            }
        }

        let mut sums = vec![[0f64; 6]; centers.len()];
        for (p, &k) in labels.iter().enumerate() {
            if k == NONE {
                continue;
            }
            let s = &mut sums[k as usize];
            let c = lab[p];
            s[0] += c[0] as f64;
            s[1] += c[1] as f64;
            s[2] += c[2] as f64;
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            s[5] += disp.values[p] as f64;
        }
        let mut counts = vec![0usize; centers.len()];
        for &k in &labels {
            if k != NONE {
                counts[k as usize] += 1;
            }
        }
        let mut motion: f64 = 0.0;
        for (k, c) in centers.iter_mut().enumerate() {
            let n = counts[k];
            if n == 0 {
                continue;
            }
            let s = sums[k];
            let inv = 1.0 / n as f64;
            let (nx, ny) = (s[3] * inv, s[4] * inv);
            motion = motion.max(((nx - c.x).powi(2) + (ny - c.y).powi(2)).sqrt());
            *c = Center {
                lab: [s[0] * inv, s[1] * inv, s[2] * inv],
                x: nx,
                y: ny,
                d: s[5] * inv,
            };
        }
        if motion < params.convergence {
            break;
        }
    }
    labels
}

/// Per-superpixel central statistics used to fill disocclusions.
struct FillCenter {
    lab: [f64; 3],
    x: f64,
    y: f64,
    d: f64,
}

fn fill_centers(lf: &LightField, disp: &DisparityMap, central: &[u32], count: usize) -> Vec<FillCenter> {
    let w = lf.geometry().width;
    let lab = lf.central_lab();
    let mut sums = vec![[0f64; 7]; count];
    for (p, &id) in central.iter().enumerate() {
        let s = &mut sums[id as usize];
        s[0] += lab[p][0] as f64;
        s[1] += lab[p][1] as f64;
        s[2] += lab[p][2] as f64;
        s[3] += (p % w) as f64;
        s[4] += (p / w) as f64;
        s[5] += disp.values[p] as f64;
        s[6] += 1.0;
    }
    sums.into_iter()
        .map(|s| {
            let inv = 1.0 / s[6].max(1.0);
            FillCenter {
                lab: [s[0] * inv, s[1] * inv, s[2] * inv],
                x: s[3] * inv,
                y: s[4] * inv,
                d: s[5] * inv,
            }
        })
        .collect()
}

/// Carries central ids into one other view and fills the holes.
#[allow(clippy::too_many_arguments)]
fn propagate_view(
    lf: &LightField,
    disp: &DisparityMap,
    central: &[u32],
    centers: &[FillCenter],
    params: &LfspParams,
    view: usize,
    out: &mut [u32],
) {
    let g = lf.geometry();
    let (w, h) = (g.width, g.height);
    let (du, dv) = g.view_offset(view);
    let mut depth = vec![f64::NEG_INFINITY; w * h];
    out.fill(NONE);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let d = disp.values[p] as f64;
            if let Some((sx, sy)) = g.shear(x, y, d, du, dv) {
                let q = sy * w + sx;
                if d > depth[q] {
                    depth[q] = d;
                    out[q] = central[p];
                }
            }
        }
    }

    let (u, v) = g.view_coords(view);
    let lab = lf.view_lab(u, v);
    let m = params.size as f64;
    let mut visited = vec![false; w * h];
    let mut queue = std::collections::VecDeque::new();
    let mut hole = Vec::new();
    for start in 0..w * h {
        if out[start] != NONE || visited[start] {
            continue;
        }
        // Breadth-first fill of one connected hole; collect the superpixels
        // bordering it.
        hole.clear();
        let mut bordering: Vec<u32> = Vec::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            hole.push(p);
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if out[q] == NONE {
                    if !visited[q] {
                        visited[q] = true;
                        queue.push_back(q);
                    }
                } else {
                    bordering.push(out[q]);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        bordering.sort_unstable();
        bordering.dedup();
        if bordering.is_empty() {
            bordering = (0..centers.len() as u32).collect();
        }
        for &p in &hole {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            let mut best = (f64::INFINITY, bordering[0]);
            for &id in &bordering {
                let c = &centers[id as usize];
                let cx = c.x + c.d * du;
                let cy = c.y + c.d * dv;
                let dxy = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                let score = lab_distance(lab[p], c.lab) + params.compactness * dxy / m;
                if score < best.0 {
                    best = (score, id);
                }
            }
            out[p] = best.1;
        }
    }
}

/// Partitions the light field into view-coherent superpixels.
pub fn compute_lfsp(
    lf: &LightField,
    disp: &DisparityMap,
    params: &LfspParams,
) -> Result<LfspSegmentation> {
    let g = *lf.geometry();
    if params.size < 4 {
        return Err(Error::InvalidParameter(format!(
            "superpixel size {} must be at least 4",
            params.size
        )));
    }
    if !(params.compactness >= 0.0) || !(params.disparity_weight >= 0.0) {
        return Err(Error::InvalidParameter(
            "compactness and disparity weight must be non-negative".into(),
        ));
    }
    if disp.width != g.width || disp.height != g.height {
        return Err(Error::DimensionMismatch(format!(
            "disparity map is {}x{}, views are {}x{}",
            disp.width, disp.height, g.width, g.height
        )));
    }

    let raw = cluster_central(lf, disp, params);
    let (central, count) = connectivity::enforce(&raw, g.width, g.height);

    let n = g.pixels_per_view();
    let centers = fill_centers(lf, disp, &central, count);
    let central_view = g.central_view();
    let mut assignment = vec![NONE; g.ray_count()];
    assignment
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(view, out)| {
            if view == central_view {
                out.copy_from_slice(&central);
            } else {
                propagate_view(lf, disp, &central, &centers, params, view, out);
            }
        });

    Ok(LfspSegmentation {
        geometry: g,
        assignment,
        count,
        size: params.size,
    })
}
