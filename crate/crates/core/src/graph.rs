//! The LFSP graph.
//!
//! Two superpixels are spatial neighbors when their central-view slice
//! centers lie within `sqrt(2) * M` of each other. They are indirect angular
//! neighbors when the same test passes in some other view but not in the
//! central one, which is how parallax exposes new contacts. Slices of one
//! superpixel across views need no edges at all: they share a vertex.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lfsp::{LfspFeature, LfspSegmentation, SeedSet};
use crate::lightfield::{round_half_up, Geometry, Ray};

/// Ray neighborhoods of a single pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelNeighbors {
    pub spatial: Vec<Ray>,
    pub angular: Vec<Ray>,
}

const OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// The 8 spatial neighbors of `p` in its own view and the 8 angular
/// neighbors in the surrounding views, each sheared by `d` per view step and
/// rounded to the nearest pixel. Out-of-bounds rays are dropped.
pub fn pixel_neighbors(geometry: &Geometry, p: Ray, d: f64) -> PixelNeighbors {
    let g = geometry;
    let mut spatial = Vec::with_capacity(8);
    let mut angular = Vec::with_capacity(8);
    for &(dx, dy) in &OFFSETS {
        let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
        if x >= 0 && y >= 0 && (x as usize) < g.width && (y as usize) < g.height {
            spatial.push(Ray::new(p.u, p.v, x as usize, y as usize));
        }
    }
    for &(du, dv) in &OFFSETS {
        let (u, v) = (p.u as i64 + du, p.v as i64 + dv);
        let x = round_half_up(p.x as f64 + du as f64 * d);
        let y = round_half_up(p.y as f64 + dv as f64 * d);
        let ok = u >= 0
            && v >= 0
            && (u as usize) < g.u_count
            && (v as usize) < g.v_count
            && x >= 0
            && y >= 0
            && (x as usize) < g.width
            && (y as usize) < g.height;
        if ok {
            angular.push(Ray::new(u as usize, v as usize, x as usize, y as usize));
        }
    }
    PixelNeighbors { spatial, angular }
}

/// Slice centers of one view: `(lfsp id, center)` for every non-empty slice.
fn view_centers(features: &[LfspFeature], view: usize) -> Vec<(u32, [f64; 2])> {
    features
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.views[view].is_empty())
        .map(|(i, f)| (i as u32, f.views[view].position))
        .collect()
}

/// All pairs `(i, j)`, `i < j`, whose centers are within `radius`. Candidates
/// come from a grid hash with cell size `radius`, so every qualifying pair
/// sits in the same or an adjacent cell.
pub fn close_pairs(centers: &[(u32, [f64; 2])], radius: f64) -> Vec<(u32, u32)> {
    let r2 = radius * radius;
    let cell = radius.max(f64::MIN_POSITIVE);
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, &(_, p)) in centers.iter().enumerate() {
        grid.entry(key(p)).or_default().push(k);
    }
    let mut out = Vec::new();
    for &(a, pa) in centers {
        let (cx, cy) = key(pa);
        for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                let Some(bucket) = grid.get(&(gx, gy)) else {
                    continue;
                };
                for &k in bucket {
                    let (b, pb) = centers[k];
                    if b <= a {
                        continue;
                    }
                    let (dx, dy) = (pa[0] - pb[0], pa[1] - pb[1]);
                    if dx * dx + dy * dy <= r2 {
                        out.push((a, b));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Adjacency radius `sqrt(2) * M`.
pub fn adjacency_radius(size: usize) -> f64 {
    std::f64::consts::SQRT_2 * size as f64
}

/// Central-view center-distance adjacency.
pub fn spatial_adjacency(seg: &LfspSegmentation, features: &[LfspFeature]) -> Vec<(u32, u32)> {
    let central = seg.geometry().central_view();
    close_pairs(&view_centers(features, central), adjacency_radius(seg.size()))
}

/// Pairs that pass the center-distance test in at least one non-central view
/// and are not spatial neighbors, with the views that witness them.
pub fn angular_adjacency(
    seg: &LfspSegmentation,
    features: &[LfspFeature],
    spatial: &[(u32, u32)],
) -> Vec<((u32, u32), Vec<usize>)> {
    let g = seg.geometry();
    let central = g.central_view();
    let radius = adjacency_radius(seg.size());
    let per_view: Vec<(usize, Vec<(u32, u32)>)> = (0..g.view_count())
        .into_par_iter()
        .filter(|&v| v != central)
        .map(|v| (v, close_pairs(&view_centers(features, v), radius)))
        .collect();
    let mut merged: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (view, pairs) in per_view {
        for pair in pairs {
            merged.entry(pair).or_default().push(view);
        }
    }
    for pair in spatial {
        merged.remove(pair);
    }
    merged.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Spatial,
    Angular,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Spatial => "spatial",
            EdgeKind::Angular => "angular",
        }
    }
}

/// An unordered superpixel pair, `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub kind: EdgeKind,
    /// Views in which the pair passed the distance test.
    pub views: Vec<usize>,
    /// Similarity `B` in `(0, 1]`; `1` until the energy assigns it.
    pub weight: f64,
}

/// Seed-independent adjacency; computed once per segmentation and reused
/// across scribble edits.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub lfsp_count: usize,
    pub edges: Vec<Edge>,
}

impl Adjacency {
    pub fn compute(seg: &LfspSegmentation, features: &[LfspFeature]) -> Result<Self> {
        if features.len() != seg.count() {
            return Err(Error::DimensionMismatch(format!(
                "{} features for {} superpixels",
                features.len(),
                seg.count()
            )));
        }
        let central = seg.geometry().central_view();
        let spatial = spatial_adjacency(seg, features);
        let angular = angular_adjacency(seg, features, &spatial);
        let mut edges = Vec::with_capacity(spatial.len() + angular.len());
        edges.extend(spatial.into_iter().map(|(a, b)| Edge {
            a,
            b,
            kind: EdgeKind::Spatial,
            views: vec![central],
            weight: 1.0,
        }));
        edges.extend(angular.into_iter().map(|((a, b), views)| Edge {
            a,
            b,
            kind: EdgeKind::Angular,
            views,
            weight: 1.0,
        }));
        Ok(Self {
            lfsp_count: seg.count(),
            edges,
        })
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}

/// Superpixel vertices, one terminal per label, and the weighted edges.
#[derive(Debug, Clone, PartialEq)]
pub struct LfspGraph {
    pub lfsp_count: usize,
    pub seeds: SeedSet,
    pub edges: Vec<Edge>,
}

impl LfspGraph {
    /// Attaches seeds to an adjacency. At least two labels must have seeds.
    pub fn new(adjacency: Adjacency, seeds: SeedSet) -> Result<Self> {
        let labels = seeds.distinct_labels();
        if labels < 2 {
            return Err(Error::NothingToSegment(format!(
                "scribbles carry {labels} label(s), at least 2 are required"
            )));
        }
        if let Some((&id, _)) = seeds.seeds.iter().find(|(&id, _)| id as usize >= adjacency.lfsp_count) {
            return Err(Error::OutOfRange(format!(
                "seed superpixel {id} does not exist ({} superpixels)",
                adjacency.lfsp_count
            )));
        }
        Ok(Self {
            lfsp_count: adjacency.lfsp_count,
            seeds,
            edges: adjacency.edges,
        })
    }

    pub fn label_count(&self) -> u8 {
        self.seeds.label_count
    }

    /// Superpixel vertices plus one terminal per label.
    pub fn vertex_count(&self) -> usize {
        self.lfsp_count + self.seeds.label_count as usize
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Line-oriented dump: `v <id> [seed <label>]` per superpixel, then
    /// `e <a> <b> spatial|angular <weight>` per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for id in 0..self.lfsp_count as u32 {
            match self.seeds.label_of(id) {
                Some(l) => writeln!(s, "v {id} seed {l}").unwrap(),
                None => writeln!(s, "v {id}").unwrap(),
            }
        }
        for e in &self.edges {
            writeln!(s, "e {} {} {} {}", e.a, e.b, e.kind.name(), e.weight).unwrap();
        }
        s
    }
}

/// Adjacency plus seeds in one call.
pub fn build_graph(seg: &LfspSegmentation, features: &[LfspFeature], seeds: SeedSet) -> Result<LfspGraph> {
    LfspGraph::new(Adjacency::compute(seg, features)?, seeds)
}
