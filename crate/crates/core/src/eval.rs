//! Accuracy, cross-view coherence, graph size and smoothing ablation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, EdgeKind};
use crate::lightfield::{Geometry, GroundTruth, ViewLabels};
use crate::pipeline::{Run, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMapping {
    /// Match predicted to ground-truth labels by greedy maximum overlap.
    #[default]
    Auto,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Percentage over all pixels of all views.
    pub pooled: f64,
    /// Percentage per view, indexed like the view grid.
    pub per_view: Vec<f64>,
    /// `(predicted, ground truth)` pairs used for scoring.
    pub mapping: Vec<(u8, u8)>,
}

/// Greedy maximum-overlap assignment on the confusion matrix.
fn auto_mapping(pred: &[u8], gt: &[u8]) -> Vec<(u8, u8)> {
    let mut confusion = vec![[0u64; 256]; 256];
    for (&p, &g) in pred.iter().zip(gt) {
        confusion[p as usize][g as usize] += 1;
    }
    let mut cells: Vec<(u64, u8, u8)> = Vec::new();
    for p in 0..256 {
        for g in 0..256 {
            let c = confusion[p][g];
            if c > 0 {
                cells.push((c, p as u8, g as u8));
            }
        }
    }
    // Largest overlap first; ties by label ids for determinism.
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_p, mut used_g) = ([false; 256], [false; 256]);
    let mut mapping = Vec::new();
    for (_, p, g) in cells {
        if !used_p[p as usize] && !used_g[g as usize] {
            used_p[p as usize] = true;
            used_g[g as usize] = true;
            mapping.push((p, g));
        }
    }
    mapping.sort_unstable();
    mapping
}

/// Percentage of pixels whose (mapped) predicted label equals ground truth.
pub fn accuracy(pred: &ViewLabels, gt: &ViewLabels, mapping: LabelMapping) -> Result<Accuracy> {
    if pred.geometry != gt.geometry {
        return Err(Error::DimensionMismatch(
            "prediction and ground truth have different shapes".into(),
        ));
    }
    let mapping = match mapping {
        LabelMapping::Identity => (0..=255u8).map(|l| (l, l)).collect(),
        LabelMapping::Auto => auto_mapping(&pred.labels, &gt.labels),
    };
    // Predicted labels without a partner never count as correct.
    let mut table = [None::<u8>; 256];
    for &(p, g) in &mapping {
        table[p as usize] = Some(g);
    }
    let g = pred.geometry;
    let n = g.pixels_per_view();
    let mut correct_total = 0u64;
    let per_view = (0..g.view_count())
        .map(|view| {
            let correct = pred
                .view_by_index(view)
                .iter()
                .zip(gt.view_by_index(view))
                .filter(|(&p, &t)| table[p as usize] == Some(t))
                .count() as u64;
            correct_total += correct;
            100.0 * correct as f64 / n as f64
        })
        .collect();
    let mapping = match mapping.len() {
        256 => Vec::new(),
        _ => mapping,
    };
    Ok(Accuracy {
        pooled: 100.0 * correct_total as f64 / g.ray_count() as f64,
        per_view,
        mapping,
    })
}

/// Fraction of central-view pixels whose label is found again at their
/// reprojection in every other view where they are visible. Visibility comes
/// from a per-view z-buffer over the given disparity; pixels visible in no
/// other view are not counted. Returns 1 when nothing is counted.
pub fn coherence(pred: &ViewLabels, disparity: &[f32]) -> Result<f64> {
    let g = pred.geometry;
    let n = g.pixels_per_view();
    if disparity.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} disparity values for {n} pixels",
            disparity.len()
        )));
    }
    let central = pred.central();
    let mut checked = vec![false; n];
    let mut coherent = vec![true; n];
    let mut zbuf = vec![f32::NEG_INFINITY; n];
    let mut target = vec![usize::MAX; n];
    for view in 0..g.view_count() {
        if view == g.central_view() {
            continue;
        }
        let (du, dv) = g.view_offset(view);
        zbuf.fill(f32::NEG_INFINITY);
        for p in 0..n {
            target[p] = usize::MAX;
            if let Some((x, y)) = g.shear(p % g.width, p / g.width, disparity[p] as f64, du, dv) {
                let q = y * g.width + x;
                target[p] = q;
                zbuf[q] = zbuf[q].max(disparity[p]);
            }
        }
        let labels = pred.view_by_index(view);
        for p in 0..n {
            let q = target[p];
            if q == usize::MAX || disparity[p] < zbuf[q] {
                continue;
            }
            checked[p] = true;
            if labels[q] != central[p] {
                coherent[p] = false;
            }
        }
    }
    let total = checked.iter().filter(|&&c| c).count();
    if total == 0 {
        return Ok(1.0);
    }
    let good = (0..n).filter(|&p| checked[p] && coherent[p]).count();
    Ok(good as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub ray_count: usize,
    /// Superpixel vertices; label terminals are reported separately.
    pub vertex_count: usize,
    pub terminal_count: usize,
    pub spatial_edges: usize,
    pub angular_edges: usize,
    /// Rays per superpixel vertex.
    pub reduction: f64,
}

pub fn graph_stats(adjacency: &Adjacency, geometry: &Geometry, terminals: usize) -> GraphStats {
    let ray_count = geometry.ray_count();
    let vertex_count = adjacency.lfsp_count;
    GraphStats {
        ray_count,
        vertex_count,
        terminal_count: terminals,
        spatial_edges: adjacency.count(EdgeKind::Spatial),
        angular_edges: adjacency.count(EdgeKind::Angular),
        reduction: ray_count as f64 / vertex_count.max(1) as f64,
    }
}

/// Pooled accuracy of the unsmoothed (unary argmin) and the optimized
/// labelings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub initial: f64,
    pub smoothed: f64,
}

impl Ablation {
    pub fn gain(&self) -> f64 {
        self.smoothed - self.initial
    }
}

pub fn ablation(run: &Run, gt: &GroundTruth) -> Result<Ablation> {
    Ok(Ablation {
        initial: accuracy(&run.initial_view_labels(), &gt.labels, LabelMapping::Auto)?.pooled,
        smoothed: accuracy(&run.view_labels(), &gt.labels, LabelMapping::Auto)?.pooled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scene: String,
    pub config: String,
    pub accuracy: Accuracy,
    pub graph: Option<GraphStats>,
    pub timings: Option<Timings>,
    pub ablation: Option<Ablation>,
    pub coherence: Option<f64>,
}

impl EvalReport {
    /// Full evaluation of a run against ground truth.
    pub fn from_run(scene: &str, config: &str, run: &Run, gt: &GroundTruth) -> Result<Self> {
        let labels = run.view_labels();
        let acc = accuracy(&labels, &gt.labels, LabelMapping::Auto)?;
        let coherence = if gt.disparity.is_empty() {
            None
        } else {
            Some(coherence(&labels, &gt.disparity)?)
        };
        Ok(Self {
            scene: scene.into(),
            config: config.into(),
            accuracy: acc,
            graph: Some(graph_stats(
                &run.pre.adjacency,
                &labels.geometry,
                run.outcome.graph.label_count() as usize,
            )),
            timings: Some(run.timings()),
            ablation: Some(ablation(run, gt)?),
            coherence,
        })
    }
}

/// Renders reports as a scene x configuration accuracy table.
pub fn table(reports: &[EvalReport]) -> String {
    let sw = reports.iter().map(|r| r.scene.len()).max().unwrap_or(0).max(5);
    let cw = reports.iter().map(|r| r.config.len()).max().unwrap_or(0).max(6);
    let mut s = String::new();
    writeln!(s, "{:<sw$}  {:<cw$}  {:>8}  {:>10}  {:>9}", "scene", "config", "accuracy", "w/o smooth", "coherence").unwrap();
    for r in reports {
        let initial = r.ablation.map_or("-".to_string(), |a| format!("{:.2}", a.initial));
        let coh = r.coherence.map_or("-".to_string(), |c| format!("{c:.4}"));
        writeln!(
            s,
            "{:<sw$}  {:<cw$}  {:>8.2}  {:>10}  {:>9}",
            r.scene, r.config, r.accuracy.pooled, initial, coh
        )
        .unwrap();
    }
    if reports.len() > 1 {
        let mean = reports.iter().map(|r| r.accuracy.pooled).sum::<f64>() / reports.len() as f64;
        writeln!(s, "{:<sw$}  {:<cw$}  {:>8.2}", "average", "", mean).unwrap();
    }
    s
}
