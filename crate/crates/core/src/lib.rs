//! Interactive segmentation of 4D light fields.
//!
//! A light field `L(u, v, x, y)` is clustered into light-field superpixels
//! (LFSPs): bundles of rays that come from one small scene region and
//! therefore look alike in every view. Each LFSP becomes a single vertex of
//! a compact graph whose edges join superpixels that are spatially adjacent
//! in the central view, or that only become adjacent in some other view
//! because of parallax. User scribbles on the central view seed a
//! multi-label Potts energy which is minimized by alpha-expansion over
//! max-flow. Because every ray of an LFSP shares its vertex, the labeling is
//! coherent across all views by construction.
//!
//! The stages map onto modules:
//!
//! - [`lightfield`], [`color`], [`synth`], [`io`]: data model, loaders and a
//!   synthetic scene generator with ground truth.
//! - [`disparity`]: central-view disparity from EPI structure tensors.
//! - [`lfsp`]: superpixel clustering, per-view features, scribble seeds.
//! - [`graph`]: spatial and indirect angular LFSP adjacency.
//! - [`energy`]: data and smoothness terms.
//! - [`maxflow`], [`optimizer`]: min-cut solver and alpha-expansion.
//! - [`pipeline`]: the end-to-end run plus a cached interactive session.
//! - [`eval`]: accuracy, coherence, graph-size and ablation reports.
//! - [`service`]: HTTP endpoints for the interactive loop.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod color;
pub mod disparity;
pub mod energy;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod lfsp;
pub mod lightfield;
pub mod maxflow;
pub mod optimizer;
pub mod params;
pub mod pipeline;
pub mod render;
#[cfg(feature = "service")]
pub mod service;
pub mod synth;

pub use error::{Error, Result, Stage};
pub use lightfield::{Geometry, LightField, Ray, ViewLabels};
