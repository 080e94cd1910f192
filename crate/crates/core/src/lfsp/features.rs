//! Per-superpixel, per-view mean features.

use rayon::prelude::*;

use super::LfspSegmentation;
use crate::disparity::DisparityMap;
use crate::error::{Error, Result};
use crate::lightfield::LightField;

/// Mean color and position of one superpixel slice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SliceStats {
    pub pixel_count: usize,
    pub color: [f64; 3],
    pub position: [f64; 2],
}

impl SliceStats {
    pub fn is_empty(&self) -> bool {
        self.pixel_count == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfspFeature {
    /// One entry per view, indexed like [`crate::Geometry::view_index`].
    pub views: Vec<SliceStats>,
    /// Mean disparity over the central slice.
    pub disparity: f64,
    /// Pixel-count-weighted means over all views.
    pub color: [f64; 3],
    pub position: [f64; 2],
    pub central_view: usize,
}

impl LfspFeature {
    pub fn central(&self) -> &SliceStats {
        &self.views[self.central_view]
    }

    /// Central slice color, or the all-view aggregate when the central
    /// slice is empty.
    pub fn central_color(&self) -> [f64; 3] {
        let c = self.central();
        if c.is_empty() {
            self.color
        } else {
            c.color
        }
    }

    pub fn central_position(&self) -> [f64; 2] {
        let c = self.central();
        if c.is_empty() {
            self.position
        } else {
            c.position
        }
    }

    pub fn total_pixels(&self) -> usize {
        self.views.iter().map(|s| s.pixel_count).sum()
    }
}

#[derive(Clone, Copy, Default)]
struct Acc {
    n: usize,
    c: [f64; 3],
    x: f64,
    y: f64,
}

/// Exact arithmetic means of color and position per view slice, plus the
/// central-slice mean disparity. Each slice sums its pixels in raster order.
pub fn init_features(
    lf: &LightField,
    disp: &DisparityMap,
    seg: &LfspSegmentation,
) -> Result<Vec<LfspFeature>> {
    let g = *lf.geometry();
    if *seg.geometry() != g {
        return Err(Error::DimensionMismatch(
            "segmentation does not match the light field".into(),
        ));
    }
    if disp.width != g.width || disp.height != g.height {
        return Err(Error::DimensionMismatch(
            "disparity map does not match the central view".into(),
        ));
    }
    let count = seg.count();
    let w = g.width;
    let per_view: Vec<Vec<Acc>> = (0..g.view_count())
        .into_par_iter()
        .map(|view| {
            let (u, v) = g.view_coords(view);
            let lab = lf.view_lab(u, v);
            let ids = seg.view(view);
            let mut acc = vec![Acc::default(); count];
            for (p, (&id, c)) in ids.iter().zip(lab).enumerate() {
                let a = &mut acc[id as usize];
                a.n += 1;
                a.c[0] += c[0] as f64;
                a.c[1] += c[1] as f64;
                a.c[2] += c[2] as f64;
                a.x += (p % w) as f64;
                a.y += (p / w) as f64;
            }
            acc
        })
        .collect();

    let mut disp_sum = vec![0f64; count];
    let mut disp_n = vec![0usize; count];
    for (&id, &d) in seg.central().iter().zip(&disp.values) {
        disp_sum[id as usize] += d as f64;
        disp_n[id as usize] += 1;
    }

    let central_view = g.central_view();
    let features = (0..count)
        .map(|id| {
            let views: Vec<SliceStats> = per_view
                .iter()
                .map(|acc| {
                    let a = acc[id];
                    if a.n == 0 {
                        SliceStats::default()
                    } else {
                        let n = a.n as f64;
                        SliceStats {
                            pixel_count: a.n,
                            color: [a.c[0] / n, a.c[1] / n, a.c[2] / n],
                            position: [a.x / n, a.y / n],
                        }
                    }
                })
                .collect();
            let total: usize = views.iter().map(|s| s.pixel_count).sum();
            let mut color = [0.0; 3];
            let mut position = [0.0; 2];
            if total > 0 {
                for s in &views {
                    let wgt = s.pixel_count as f64 / total as f64;
                    for c in 0..3 {
                        color[c] += wgt * s.color[c];
                    }
                    position[0] += wgt * s.position[0];
                    position[1] += wgt * s.position[1];
                }
            }
            LfspFeature {
                views,
                disparity: if disp_n[id] > 0 {
                    disp_sum[id] / disp_n[id] as f64
                } else {
                    0.0
                },
                color,
                position,
                central_view,
            }
        })
        .collect();
    Ok(features)
}
