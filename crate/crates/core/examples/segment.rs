//! End-to-end segmentation of the three-plane scene from synthetic
//! scribbles, with estimated and with ground-truth disparity.
//!
//! cargo run --release --example segment -- [OUT_DIR]

use std::path::PathBuf;

use lfseg::disparity::DisparityMap;
use lfseg::eval::{accuracy, LabelMapping};
use lfseg::io::{save_png_rgb, save_view_labels};
use lfseg::params::Params;
use lfseg::pipeline::{segment, DisparitySource};
use lfseg::render::overlay;
use lfseg::synth::{scribbles_from_ground_truth, synth_scene, three_planes, ScribbleStyle};

fn main() -> lfseg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lfseg-segment"));
    let (lf, gt) = synth_scene(&three_planes(9, 9, 128, 128))?;
    let g = *lf.geometry();
    let scribbles = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense()).rasterize()?;

    let runs = [
        ("estimated", DisparitySource::Estimate, Params::for_estimated_disparity()),
        (
            "ground-truth",
            DisparitySource::Given(DisparityMap::from_values(g.width, g.height, gt.disparity.clone())?),
            Params::default(),
        ),
    ];
    for (name, source, params) in runs {
        let run = segment(&lf, &source, &scribbles, &params)?;
        let labels = run.view_labels();
        let acc = accuracy(&labels, &gt.labels, LabelMapping::Auto)?;
        let t = run.timings();
        println!(
            "{name:<13} {:>4} superpixels  accuracy {:6.2}%  energy {:.3} -> {:.3}  {:.0} ms",
            run.pre.segmentation.count(),
            acc.pooled,
            run.outcome.result.trace[0],
            run.outcome.result.energy(),
            t.total_ms()
        );
        let dir = out.join(name);
        save_view_labels(&dir, "label", &labels)?;
        let img = overlay(lf.central_srgb(), labels.central(), g.width, g.height, 0.45);
        save_png_rgb(&dir.join("overlay.png"), g.width, g.height, &img)?;
    }
    println!("-> {}", out.display());
    Ok(())
}
