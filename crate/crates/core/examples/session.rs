//! Interactive loop: preprocess once, then segment, add a stroke and
//! segment again on the cached graph.
//!
//! cargo run --release --example session

use std::sync::Arc;
use std::time::Instant;

use lfseg::eval::{accuracy, LabelMapping};
use lfseg::lfsp::ScribbleMap;
use lfseg::params::Params;
use lfseg::pipeline::{DisparitySource, Session};
use lfseg::synth::{scribbles_from_ground_truth, synth_scene, three_planes, ScribbleStyle};

fn main() -> lfseg::Result<()> {
    let (lf, gt) = synth_scene(&three_planes(9, 9, 128, 128))?;
    let start = Instant::now();
    let mut session = Session::new(Arc::new(lf), DisparitySource::Estimate, Params::for_estimated_disparity())?;
    println!("preprocessing {:.0} ms", start.elapsed().as_secs_f64() * 1e3);

    let mut style = ScribbleStyle::sparse();
    let first = scribbles_from_ground_truth(&gt, &style).rasterize()?;
    report(&mut session, &gt, first.clone(), "one stroke per region")?;

    style.lines = 3;
    let more = scribbles_from_ground_truth(&gt, &style).rasterize()?;
    let merged: Vec<u8> = first
        .labels
        .iter()
        .zip(&more.labels)
        .map(|(&a, &b)| if a != 0 { a } else { b })
        .collect();
    let merged = ScribbleMap::new(first.width, first.height, merged)?;
    report(&mut session, &gt, merged, "after adding strokes")?;
    Ok(())
}

fn report(session: &mut Session, gt: &lfseg::lightfield::GroundTruth, scribbles: ScribbleMap, what: &str) -> lfseg::Result<()> {
    let start = Instant::now();
    let outcome = session.segment(scribbles)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let labels = outcome.labels().expand(&session.preprocessed().segmentation)?;
    let acc = accuracy(&labels, &gt.labels, LabelMapping::Auto)?;
    println!("{what:<22} {:6.2}%  {:>2} seeds  {ms:.1} ms", acc.pooled, outcome.seeds.seeds.len());
    Ok(())
}
