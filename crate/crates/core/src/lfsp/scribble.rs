//! User scribbles and their propagation onto superpixels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LfspSegmentation;
use crate::error::{Error, Result};

/// Central-view label map drawn by the user: `0` is unlabeled, `k >= 1` is
/// label `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScribbleMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
    pub label_count: u8,
}

impl ScribbleMap {
    /// Validates that every label in `1..=max` has at least one pixel.
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "scribble map has {} pixels, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        let label_count = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; label_count as usize + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(k) = (1..=label_count as usize).find(|&k| !seen[k]) {
            return Err(Error::InvalidInput(format!(
                "scribble label {k} has no pixels (labels must be 1..={label_count} without gaps)"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            label_count,
        })
    }
}

/// A polyline brush stroke in image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub label: u8,
    pub radius: f64,
    pub points: Vec<[f64; 2]>,
}

/// The `scribbles.json` document: an ordered stroke list. Later strokes
/// paint over earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strokes {
    pub width: usize,
    pub height: usize,
    pub strokes: Vec<Stroke>,
}

fn segment_distance2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    dx * dx + dy * dy
}

impl Strokes {
    /// Rasterizes with round caps and joins: a pixel is painted when its
    /// center lies within `radius` of the polyline.
    pub fn rasterize(&self) -> Result<ScribbleMap> {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![0u8; w * h];
        for (i, s) in self.strokes.iter().enumerate() {
            if s.label == 0 {
                return Err(Error::InvalidInput(format!("stroke {i} has label 0")));
            }
            if s.points.is_empty() || !(s.radius >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "stroke {i} needs at least one point and a non-negative radius"
                )));
            }
            let r2 = s.radius * s.radius;
            let segments: Vec<([f64; 2], [f64; 2])> = if s.points.len() == 1 {
                vec![(s.points[0], s.points[0])]
            } else {
                s.points.windows(2).map(|p| (p[0], p[1])).collect()
            };
            for &(a, b) in &segments {
                let x_lo = (a[0].min(b[0]) - s.radius).floor().max(0.0) as usize;
                let y_lo = (a[1].min(b[1]) - s.radius).floor().max(0.0) as usize;
                let x_hi = ((a[0].max(b[0]) + s.radius).ceil().max(-1.0) as i64).min(w as i64 - 1);
                let y_hi = ((a[1].max(b[1]) + s.radius).ceil().max(-1.0) as i64).min(h as i64 - 1);
                if x_hi < 0 || y_hi < 0 {
                    continue;
                }
                for y in y_lo..=y_hi as usize {
                    for x in x_lo..=x_hi as usize {
                        if segment_distance2([x as f64, y as f64], a, b) <= r2 {
                            labels[y * w + x] = s.label;
                        }
                    }
                }
            }
        }
        ScribbleMap::new(w, h, labels)
    }
}

/// Superpixels fixed to a label by the user (the graph's terminals).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SeedSet {
    pub seeds: BTreeMap<u32, u8>,
    pub label_count: u8,
}

impl SeedSet {
    pub fn label_of(&self, lfsp: u32) -> Option<u8> {
        self.seeds.get(&lfsp).copied()
    }

    /// Number of distinct labels that actually have seeds.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.label_count as usize + 1];
        for &l in self.seeds.values() {
            seen[l as usize] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

/// Assigns each superpixel touched by scribbles the majority scribble label
/// inside its central slice (ties go to the smaller label).
pub fn propagate_scribbles(seg: &LfspSegmentation, scribbles: &ScribbleMap) -> Result<SeedSet> {
    let g = seg.geometry();
    if scribbles.width != g.width || scribbles.height != g.height {
        return Err(Error::DimensionMismatch(format!(
            "scribbles are {}x{}, central view is {}x{}",
            scribbles.width, scribbles.height, g.width, g.height
        )));
    }
    let k = scribbles.label_count as usize;
    let mut counts = vec![0u32; seg.count() * (k + 1)];
    for (&id, &l) in seg.central().iter().zip(&scribbles.labels) {
        if l != 0 {
            counts[id as usize * (k + 1) + l as usize] += 1;
        }
    }
    let mut seeds = BTreeMap::new();
    for (id, c) in counts.chunks_exact(k + 1).enumerate() {
        if c.iter().all(|&n| n == 0) {
            continue;
        }
        let mut best = 1;
        for l in 2..=k {
            if c[l] > c[best] {
                best = l;
            }
        }
        seeds.insert(id as u32, best as u8);
    }
    let set = SeedSet {
        seeds,
        label_count: scribbles.label_count,
    };
    let mut seeded = vec![false; k + 1];
    for &l in set.seeds.values() {
        seeded[l as usize] = true;
    }
    if let Some(missing) = (1..=k).find(|&l| !seeded[l]) {
        return Err(Error::InvalidInput(format!(
            "scribble label {missing} is outvoted in every superpixel it touches and seeds none"
        )));
    }
    Ok(set)
}
