//! End-to-end segmentation.
//!
//! The run splits into preprocessing that depends only on the light field
//! (disparity, superpixels, features, adjacency) and the interactive part
//! that depends on the scribbles (seeds, data costs, edge weights,
//! optimization). A [`Session`] keeps the preprocessing so that a scribble
//! edit only repeats the second half.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::disparity::{estimate_disparity, DisparityMap};
use crate::energy::{assign_weights, compute_unary, SimilarityScales, UnaryCosts};
use crate::error::{Error, Result, Stage};
use crate::graph::{Adjacency, EdgeKind, LfspGraph};
use crate::lfsp::{compute_lfsp, init_features, propagate_scribbles, LfspFeature, LfspSegmentation, ScribbleMap, SeedSet};
use crate::lightfield::{LightField, ViewLabels};
use crate::optimizer::{minimize, LabelField, Minimized};
use crate::params::Params;

/// Where the central-view disparity comes from.
#[derive(Debug, Clone)]
pub enum DisparitySource {
    /// Structure-tensor estimate from the light field.
    Estimate,
    /// A trusted map, e.g. ground truth.
    Given(DisparityMap),
}

/// Wall time of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: Stage,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<StageTime>,
}

impl Timings {
    /// Runs `f` as `stage`, recording its duration and tagging its error.
    pub fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.stages.push(StageTime {
            stage,
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn total_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.ms).sum()
    }

    pub fn get(&self, stage: Stage) -> Option<f64> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.ms)
    }

    pub fn preprocessing_ms(&self) -> f64 {
        self.stages.iter().filter(|s| s.stage.is_preprocessing()).map(|s| s.ms).sum()
    }

    pub fn interactive_ms(&self) -> f64 {
        self.total_ms() - self.preprocessing_ms()
    }
}

/// Everything that depends only on the light field and the superpixel
/// parameters.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub disparity: DisparityMap,
    pub segmentation: LfspSegmentation,
    pub features: Vec<LfspFeature>,
    pub adjacency: Adjacency,
    pub timings: Timings,
}

pub fn preprocess(lf: &LightField, source: &DisparitySource, params: &Params) -> Result<Preprocessed> {
    params.validate()?;
    let mut t = Timings::default();
    let g = *lf.geometry();
    let disparity = t.run(Stage::Disparity, || match source {
        DisparitySource::Estimate => estimate_disparity(lf, &params.tensor),
        DisparitySource::Given(d) => {
            if d.width != g.width || d.height != g.height {
                return Err(Error::DimensionMismatch(format!(
                    "disparity is {}x{}, central view is {}x{}",
                    d.width, d.height, g.width, g.height
                )));
            }
            Ok(d.clone())
        }
    })?;
    let segmentation = t.run(Stage::Superpixels, || compute_lfsp(lf, &disparity, &params.lfsp))?;
    let features = t.run(Stage::Features, || init_features(lf, &disparity, &segmentation))?;
    let adjacency = t.run(Stage::Graph, || Adjacency::compute(&segmentation, &features))?;
    Ok(Preprocessed {
        disparity,
        segmentation,
        features,
        adjacency,
        timings: t,
    })
}

/// Result of the scribble-dependent half of a run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub seeds: SeedSet,
    pub graph: LfspGraph,
    pub unary: UnaryCosts,
    pub scales: SimilarityScales,
    pub result: Minimized,
    pub timings: Timings,
}

impl Outcome {
    pub fn labels(&self) -> &LabelField {
        &self.result.labels
    }
}

/// Seeds, data costs, edge weights and alpha-expansion on top of cached
/// preprocessing.
pub fn segment_preprocessed(pre: &Preprocessed, scribbles: &ScribbleMap, params: &Params) -> Result<Outcome> {
    params.validate()?;
    let mut t = Timings::default();
    let seeds = t.run(Stage::Scribbles, || {
        let seeds = propagate_scribbles(&pre.segmentation, scribbles)?;
        if seeds.distinct_labels() < 2 {
            return Err(Error::NothingToSegment(format!(
                "scribbles carry {} label(s), at least 2 are required",
                seeds.distinct_labels()
            )));
        }
        Ok(seeds)
    })?;
    let unary = t.run(Stage::Unary, || compute_unary(&pre.features, &seeds, &params.energy))?;
    let (graph, scales) = t.run(Stage::Weights, || {
        let mut graph = LfspGraph::new(pre.adjacency.clone(), seeds.clone())?;
        let scales = SimilarityScales::from_features(&pre.features, &params.energy);
        assign_weights(&mut graph, &pre.features, &scales);
        Ok((graph, scales))
    })?;
    let result = t.run(Stage::Optimize, || minimize(&unary, &graph, &params.energy, &params.optimizer))?;
    Ok(Outcome {
        seeds,
        graph,
        unary,
        scales,
        result,
        timings: t,
    })
}

/// A complete run: preprocessing plus one segmentation.
#[derive(Debug, Clone)]
pub struct Run {
    pub pre: Preprocessed,
    pub outcome: Outcome,
}

impl Run {
    pub fn labels(&self) -> &LabelField {
        self.outcome.labels()
    }

    /// Per-view pixel labels of the final labeling.
    pub fn view_labels(&self) -> ViewLabels {
        self.labels()
            .expand(&self.pre.segmentation)
            .expect("labels cover the segmentation")
    }

    /// Per-view pixel labels of the unsmoothed (unary argmin) labeling.
    pub fn initial_view_labels(&self) -> ViewLabels {
        self.outcome
            .result
            .initial
            .expand(&self.pre.segmentation)
            .expect("labels cover the segmentation")
    }

    /// Stage times of both halves, in execution order.
    pub fn timings(&self) -> Timings {
        let mut t = self.pre.timings.clone();
        t.stages.extend(self.outcome.timings.stages.iter().copied());
        t
    }

    pub fn trace(&self) -> Trace {
        Trace::new(&self.outcome, self.timings())
    }
}

/// Runs the whole pipeline once.
pub fn segment(lf: &LightField, source: &DisparitySource, scribbles: &ScribbleMap, params: &Params) -> Result<Run> {
    let pre = preprocess(lf, source, params)?;
    let outcome = segment_preprocessed(&pre, scribbles, params)?;
    Ok(Run { pre, outcome })
}

/// Contents of `trace.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Energy before the first move, then after every move.
    pub energy: Vec<f64>,
    pub cycles: usize,
    pub timings: Timings,
    pub preprocessing_ms: f64,
    pub interactive_ms: f64,
    pub optimize_ms: f64,
    pub lfsp_count: usize,
    pub seed_count: usize,
    pub spatial_edges: usize,
    pub angular_edges: usize,
}

impl Trace {
    pub fn new(outcome: &Outcome, timings: Timings) -> Self {
        Self {
            energy: outcome.result.trace.clone(),
            cycles: outcome.result.cycles,
            preprocessing_ms: timings.preprocessing_ms(),
            interactive_ms: timings.interactive_ms(),
            optimize_ms: timings.get(Stage::Optimize).unwrap_or(0.0),
            lfsp_count: outcome.graph.lfsp_count,
            seed_count: outcome.seeds.seeds.len(),
            spatial_edges: outcome.graph.count(EdgeKind::Spatial),
            angular_edges: outcome.graph.count(EdgeKind::Angular),
            timings,
        }
    }
}

/// Interactive state for one light field: preprocessing is computed once
/// and reused until a parameter it depends on changes.
#[derive(Debug, Clone)]
pub struct Session {
    lf: Arc<LightField>,
    source: DisparitySource,
    params: Params,
    pre: Arc<Preprocessed>,
    scribbles: Option<ScribbleMap>,
    last: Option<Arc<Outcome>>,
}

impl Session {
    pub fn new(lf: Arc<LightField>, source: DisparitySource, params: Params) -> Result<Self> {
        let pre = Arc::new(preprocess(&lf, &source, &params)?);
        Ok(Self {
            lf,
            source,
            params,
            pre,
            scribbles: None,
            last: None,
        })
    }

    pub fn light_field(&self) -> &Arc<LightField> {
        &self.lf
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn preprocessed(&self) -> &Arc<Preprocessed> {
        &self.pre
    }

    pub fn scribbles(&self) -> Option<&ScribbleMap> {
        self.scribbles.as_ref()
    }

    pub fn last(&self) -> Option<&Arc<Outcome>> {
        self.last.as_ref()
    }

    /// Replaces the parameters. Superpixel or tensor changes redo the
    /// preprocessing; energy and optimizer changes only drop the last
    /// result. Returns whether preprocessing was recomputed.
    pub fn set_params(&mut self, params: Params) -> Result<bool> {
        params.validate()?;
        let redo = params.lfsp != self.params.lfsp
            || (params.tensor != self.params.tensor && matches!(self.source, DisparitySource::Estimate));
        if redo {
            self.pre = Arc::new(preprocess(&self.lf, &self.source, &params)?);
        }
        self.params = params;
        self.last = None;
        Ok(redo)
    }

    /// Segments with new scribbles, reusing the cached preprocessing.
    pub fn segment(&mut self, scribbles: ScribbleMap) -> Result<Arc<Outcome>> {
        let outcome = Arc::new(segment_preprocessed(&self.pre, &scribbles, &self.params)?);
        self.scribbles = Some(scribbles);
        self.last = Some(outcome.clone());
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{scribbles_from_ground_truth, synth_scene, three_planes, ScribbleStyle};

    fn scene() -> (LightField, crate::lightfield::GroundTruth, ScribbleMap) {
        let (lf, gt) = synth_scene(&three_planes(5, 5, 64, 64)).unwrap();
        let scribbles = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense()).rasterize().unwrap();
        (lf, gt, scribbles)
    }

    fn small_params() -> Params {
        let mut p = Params::default();
        p.lfsp.size = 8;
        p
    }

    #[test]
    fn single_label_is_nothing_to_segment() {
        let (lf, gt, _) = scene();
        let g = lf.geometry();
        let mut labels = vec![0u8; g.pixels_per_view()];
        labels[70] = 1;
        let scribbles = ScribbleMap::new(g.width, g.height, labels).unwrap();
        let disp = DisparityMap::from_values(g.width, g.height, gt.disparity.clone()).unwrap();
        let err = segment(&lf, &DisparitySource::Given(disp), &scribbles, &small_params()).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Scribbles));
        assert!(err.to_string().contains("nothing to segment"), "{err}");
    }

    #[test]
    fn errors_carry_their_stage() {
        let (lf, _, scribbles) = scene();
        let wrong = DisparityMap::constant(10, 10, 0.0);
        let err = segment(&lf, &DisparitySource::Given(wrong), &scribbles, &small_params()).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Disparity));
    }

    #[test]
    fn session_reuses_preprocessing() {
        let (lf, gt, scribbles) = scene();
        let g = *lf.geometry();
        let disp = DisparityMap::from_values(g.width, g.height, gt.disparity.clone()).unwrap();
        let mut session = Session::new(Arc::new(lf), DisparitySource::Given(disp), small_params()).unwrap();
        let pre = session.preprocessed().clone();
        let first = session.segment(scribbles.clone()).unwrap();
        assert!(first.timings.stages.iter().all(|s| !s.stage.is_preprocessing()));
        let second = session.segment(scribbles).unwrap();
        assert!(Arc::ptr_eq(&pre, session.preprocessed()));
        assert_eq!(first.result.labels, second.result.labels);

        let mut p = *session.params();
        p.energy.lambda_s = 3.0;
        assert!(!session.set_params(p).unwrap());
        assert!(Arc::ptr_eq(&pre, session.preprocessed()));
        p.lfsp.size = 10;
        assert!(session.set_params(p).unwrap());
        assert!(!Arc::ptr_eq(&pre, session.preprocessed()));
    }

    #[test]
    fn labels_are_constant_per_superpixel_in_every_view() {
        let (lf, gt, scribbles) = scene();
        let g = *lf.geometry();
        let disp = DisparityMap::from_values(g.width, g.height, gt.disparity.clone()).unwrap();
        let run = segment(&lf, &DisparitySource::Given(disp), &scribbles, &small_params()).unwrap();
        let labels = run.view_labels();
        for (ray, &id) in run.pre.segmentation.assignment().iter().enumerate() {
            assert_eq!(labels.labels[ray], run.labels().get(id as usize));
        }
        let t = run.timings();
        assert!((t.total_ms() - t.preprocessing_ms() - t.interactive_ms()).abs() < 1e-9);
    }
}
