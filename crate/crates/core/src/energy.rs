//! The segmentation energy.
//!
//! ```text
//! E(l) = sum_i U_i(l_i)
//!      + lambda_s * sum_{spatial (i,j)} [l_i != l_j] * B_ij
//!      + lambda_a * sum_{angular (i,j)} [l_i != l_j] * B_ij
//! ```
//!
//! The unary `U_i(k)` compares superpixel `i` with the seeds of label `k` on
//! color, position and disparity, each cue min-max normalized over all
//! (unlabeled, seed) pairs. `B_ij = exp(-sum|dC| / sigma_c2 - alpha |dD| /
//! sigma_d2)` is computed from central-view features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, LfspGraph};
use crate::lfsp::{LfspFeature, SeedSet};
use crate::optimizer::LabelField;

/// Cost stored for labels a seed may not take. Never enters flow
/// arithmetic: seeds are wired structurally by the optimizer.
pub const HARD: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorNorm {
    /// Sum of absolute channel differences.
    #[default]
    L1,
    /// Euclidean distance in CIELab.
    L2,
}

/// How the costs against several seeds of one label are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedAggregation {
    #[default]
    Min,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub lambda_p: f64,
    pub lambda_d: f64,
    pub lambda_s: f64,
    pub lambda_a: f64,
    pub alpha: f64,
    /// Overrides the color variance computed from the features.
    pub sigma_c2: Option<f64>,
    /// Overrides the disparity variance computed from the features.
    pub sigma_d2: Option<f64>,
    pub color_norm: ColorNorm,
    pub seed_aggregation: SeedAggregation,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            lambda_p: 1.0,
            lambda_d: 1.0,
            lambda_s: 10.0,
            lambda_a: 2.0,
            alpha: 1.0,
            sigma_c2: None,
            sigma_d2: None,
            color_norm: ColorNorm::L1,
            seed_aggregation: SeedAggregation::Min,
        }
    }
}

impl EnergyParams {
    /// Defaults with the disparity cue turned down for estimated (noisy)
    /// disparity.
    pub fn for_estimated_disparity() -> Self {
        Self {
            lambda_d: 0.3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_p", self.lambda_p),
            ("lambda_d", self.lambda_d),
            ("lambda_s", self.lambda_s),
            ("lambda_a", self.lambda_a),
            ("alpha", self.alpha),
        ];
        for (name, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("sigma_c2", self.sigma_c2), ("sigma_d2", self.sigma_d2)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn pairwise_weight(&self, kind: EdgeKind) -> f64 {
        match kind {
            EdgeKind::Spatial => self.lambda_s,
            EdgeKind::Angular => self.lambda_a,
        }
    }
}

/// Data costs per superpixel and label. Column `k - 1` holds label `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryCosts {
    label_count: u8,
    costs: Vec<f64>,
    seeds: Vec<Option<u8>>,
}

impl UnaryCosts {
    /// Builds a cost table directly; seed rows are overwritten with hard
    /// constraints.
    pub fn from_rows(label_count: u8, rows: Vec<Vec<f64>>, seeds: &SeedSet) -> Result<Self> {
        let k = label_count as usize;
        if k == 0 {
            return Err(Error::InvalidInput("at least one label is required".into()));
        }
        let mut costs = Vec::with_capacity(rows.len() * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} costs for {k} labels",
                    row.len()
                )));
            }
            if row.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::InvalidInput(format!("row {i} has a negative or non-finite cost")));
            }
            costs.extend_from_slice(row);
        }
        let mut seed_of = vec![None; rows.len()];
        for (&id, &l) in &seeds.seeds {
            let id = id as usize;
            if id >= rows.len() || l == 0 || l > label_count {
                return Err(Error::OutOfRange(format!("seed {id} with label {l}")));
            }
            seed_of[id] = Some(l);
            for c in 0..k {
                costs[id * k + c] = if c + 1 == l as usize { 0.0 } else { HARD };
            }
        }
        Ok(Self {
            label_count,
            costs,
            seeds: seed_of,
        })
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn label_count(&self) -> u8 {
        self.label_count
    }

    /// Cost of giving superpixel `i` label `label` (1-based).
    #[inline]
    pub fn cost(&self, i: usize, label: u8) -> f64 {
        self.costs[i * self.label_count as usize + label as usize - 1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.label_count as usize;
        &self.costs[i * k..(i + 1) * k]
    }

    pub fn seed(&self, i: usize) -> Option<u8> {
        self.seeds[i]
    }

    /// Lowest-cost label per superpixel; ties go to the smaller label.
    pub fn argmin(&self) -> Vec<u8> {
        (0..self.len())
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] < row[best] {
                        best = c;
                    }
                }
                best as u8 + 1
            })
            .collect()
    }
}

/// Central-slice features used by the energy, falling back to the all-view
/// aggregate when the central slice is empty.
fn central(f: &LfspFeature) -> ([f64; 3], [f64; 2], f64) {
    (f.central_color(), f.central_position(), f.disparity)
}

/// Per-seed cue inputs, or per-seed cue distances, as parallel columns.
#[derive(Default)]
struct SeedCues {
    l: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    c: Vec<f64>,
}

impl SeedCues {
    fn new(seeds: impl Iterator<Item = ([f64; 3], [f64; 2], f64)>) -> Self {
        let mut s = Self::default();
        for (col, pos, d) in seeds {
            s.l.push(col[0]);
            s.a.push(col[1]);
            s.b.push(col[2]);
            s.x.push(pos[0]);
            s.y.push(pos[1]);
            s.c.push(d);
        }
        s
    }

    /// Writes color distance to `out.a`, squared position distance to
    /// `out.b` and disparity distance to `out.c`.
    fn distances(&self, (col, pos, d): ([f64; 3], [f64; 2], f64), norm: ColorNorm, out: &mut SeedCues) {
        out.a.clear();
        out.b.clear();
        out.c.clear();
        let (dl, da, db) = (self.l.iter(), self.a.iter(), self.b.iter());
        match norm {
            ColorNorm::L1 => out.a.extend(
                dl.zip(da)
                    .zip(db)
                    .map(|((&l, &a), &b)| (col[0] - l).abs() + (col[1] - a).abs() + (col[2] - b).abs()),
            ),
            ColorNorm::L2 => out.a.extend(dl.zip(da).zip(db).map(|((&l, &a), &b)| {
                ((col[0] - l).powi(2) + (col[1] - a).powi(2) + (col[2] - b).powi(2)).sqrt()
            })),
        }
        out.b.extend(self.x.iter().zip(&self.y).map(|(&x, &y)| {
            let (dx, dy) = (pos[0] - x, pos[1] - y);
            dx * dx + dy * dy
        }));
        out.c.extend(self.c.iter().map(|&c| (d - c).abs()));
    }
}

/// Data costs of every unlabeled superpixel against the seeds of every
/// label.
pub fn compute_unary(features: &[LfspFeature], seeds: &SeedSet, params: &EnergyParams) -> Result<UnaryCosts> {
    params.validate()?;
    let k = seeds.label_count as usize;
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (&id, &l) in &seeds.seeds {
        if id as usize >= features.len() || l == 0 || l as usize > k {
            return Err(Error::OutOfRange(format!("seed {id} with label {l}")));
        }
        by_label[l as usize].push(id as usize);
    }
    if let Some(l) = (1..=k).find(|&l| by_label[l].is_empty()) {
        return Err(Error::InvalidInput(format!("label {l} has no seed")));
    }
    // Seeds grouped by label, so each label's seeds are one contiguous run.
    let order: Vec<usize> = by_label.iter().flatten().copied().collect();
    let mut starts = Vec::with_capacity(k + 1);
    let mut at = 0;
    for l in 1..=k {
        starts.push(at);
        at += by_label[l].len();
    }
    starts.push(at);
    let unlabeled: Vec<usize> = (0..features.len())
        .filter(|&i| seeds.label_of(i as u32).is_none())
        .collect();
    let f: Vec<_> = features.iter().map(central).collect();
    let seeds_soa = SeedCues::new(order.iter().map(|&s| f[s]));

    // Two passes over all (unlabeled, seed) pairs: cue ranges, then costs.
    let empty = || ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    let (mut lo, mut hi) = unlabeled
        .par_iter()
        .fold(
            || (SeedCues::default(), empty()),
            |(mut cues, (mut lo, mut hi)), &i| {
                seeds_soa.distances(f[i], params.color_norm, &mut cues);
                for (c, col) in [&cues.a, &cues.b, &cues.c].into_iter().enumerate() {
                    let (l, h) = col
                        .iter()
                        .fold((lo[c], hi[c]), |(l, h), &v| (if v < l { v } else { l }, if v > h { v } else { h }));
                    lo[c] = l;
                    hi[c] = h;
                }
                (cues, (lo, hi))
            },
        )
        .map(|(_, range)| range)
        .reduce(empty, |(la, ha), (lb, hb)| {
            (
                std::array::from_fn(|c| la[c].min(lb[c])),
                std::array::from_fn(|c| ha[c].max(hb[c])),
            )
        });
    lo[1] = lo[1].sqrt();
    hi[1] = hi[1].sqrt();
    // Each normalized cue is `(v - lo) * scale`, folded with its weight. A
    // constant cue contributes nothing.
    let weights = [1.0, params.lambda_p, params.lambda_d];
    let scale: [f64; 3] = std::array::from_fn(|c| if hi[c] > lo[c] { weights[c] / (hi[c] - lo[c]) } else { 0.0 });
    let lo: [f64; 3] = std::array::from_fn(|c| if hi[c] > lo[c] { lo[c] } else { 0.0 });

    let mut rows = vec![vec![0.0; k]; features.len()];
    let free_rows: Vec<(usize, Vec<f64>)> = unlabeled
        .par_iter()
        .map_init(
            || (SeedCues::default(), Vec::with_capacity(order.len())),
            |(cues, combined), &i| {
                seeds_soa.distances(f[i], params.color_norm, cues);
                combined.clear();
                combined.extend(
                    cues.a
                        .iter()
                        .zip(&cues.b)
                        .zip(&cues.c)
                        .map(|((&a, &b), &c)| scale[0] * (a - lo[0]) + scale[1] * (b.sqrt() - lo[1]) + scale[2] * (c - lo[2])),
                );
                let row = (1..=k)
                    .map(|l| {
                        let costs = &combined[starts[l - 1]..starts[l]];
                        let cost = match params.seed_aggregation {
                            SeedAggregation::Min => costs.iter().fold(f64::INFINITY, |m, &c| if c < m { c } else { m }),
                            SeedAggregation::Mean => costs.iter().sum::<f64>() / costs.len() as f64,
                        };
                        cost.max(0.0)
                    })
                    .collect();
                (i, row)
            },
        )
        .collect();
    for (i, row) in free_rows {
        rows[i] = row;
    }
    UnaryCosts::from_rows(seeds.label_count, rows, seeds)
}

/// Variances used inside `B`: the color one is summed over the three CIELab
/// channels. Degenerate values are replaced with 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScales {
    pub sigma_c2: f64,
    pub sigma_d2: f64,
    pub alpha: f64,
}

impl SimilarityScales {
    pub fn from_features(features: &[LfspFeature], params: &EnergyParams) -> Self {
        let n = features.len().max(1) as f64;
        let f: Vec<_> = features.iter().map(central).collect();
        let variance = |vals: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = vals.collect();
            let mean = v.iter().sum::<f64>() / n;
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
        };
        let sigma_c2 = params.sigma_c2.unwrap_or_else(|| {
            (0..3).map(|c| variance(&mut f.iter().map(|x| x.0[c]))).sum()
        });
        let sigma_d2 = params
            .sigma_d2
            .unwrap_or_else(|| variance(&mut f.iter().map(|x| x.2)));
        let guard = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                v
            } else {
                log::warn!("{name} is degenerate ({v}); using 1.0");
                1.0
            }
        };
        Self {
            sigma_c2: guard(sigma_c2, "color variance"),
            sigma_d2: guard(sigma_d2, "disparity variance"),
            alpha: params.alpha,
        }
    }
}

/// `B = exp(-sum|dC| / sigma_c2 - alpha * |dD| / sigma_d2)`, in `(0, 1]`.
pub fn edge_similarity(a: &LfspFeature, b: &LfspFeature, scales: &SimilarityScales) -> f64 {
    let (ca, _, da) = central(a);
    let (cb, _, db) = central(b);
    let dc: f64 = (0..3).map(|c| (ca[c] - cb[c]).abs()).sum();
    (-dc / scales.sigma_c2 - scales.alpha * (da - db).abs() / scales.sigma_d2).exp()
}

/// Fills every edge weight with its similarity.
pub fn assign_weights(graph: &mut LfspGraph, features: &[LfspFeature], scales: &SimilarityScales) {
    for e in &mut graph.edges {
        e.weight = edge_similarity(&features[e.a as usize], &features[e.b as usize], scales);
    }
}

/// Smoothness part of the energy.
pub fn smoothness_energy(labels: &[u8], graph: &LfspGraph, params: &EnergyParams) -> f64 {
    graph
        .edges
        .iter()
        .filter(|e| labels[e.a as usize] != labels[e.b as usize])
        .map(|e| params.pairwise_weight(e.kind) * e.weight)
        .sum()
}

/// Total energy of a labeling. Seeds must carry their own labels.
pub fn total_energy(labeling: &LabelField, unary: &UnaryCosts, graph: &LfspGraph, params: &EnergyParams) -> Result<f64> {
    let labels = labeling.labels();
    if labels.len() != unary.len() || labels.len() != graph.lfsp_count {
        return Err(Error::DimensionMismatch(format!(
            "{} labels, {} unary rows, {} superpixels",
            labels.len(),
            unary.len(),
            graph.lfsp_count
        )));
    }
    let mut data = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 || l > unary.label_count() {
            return Err(Error::OutOfRange(format!("superpixel {i} has label {l}")));
        }
        if let Some(s) = unary.seed(i) {
            if s != l {
                return Err(Error::SeedViolation(format!(
                    "seed superpixel {i} has label {l} instead of {s}"
                )));
            }
        }
        data += unary.cost(i, l);
    }
    Ok(data + smoothness_energy(labels, graph, params))
}
