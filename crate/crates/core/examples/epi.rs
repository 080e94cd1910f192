//! Renders horizontal and vertical EPIs of a segmented light field with the
//! label EPI below each. Straight label lines mean coherent labels.
//!
//! cargo run --release --example epi -- [OUT_DIR]

use std::path::PathBuf;

use lfseg::disparity::DisparityMap;
use lfseg::io::save_png_rgb;
use lfseg::lightfield::Orientation;
use lfseg::params::Params;
use lfseg::pipeline::{segment, DisparitySource};
use lfseg::render::epi_strip;
use lfseg::synth::{scribbles_from_ground_truth, synth_scene, three_planes, ScribbleStyle};

fn main() -> lfseg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lfseg-epi"));
    std::fs::create_dir_all(&out).map_err(|e| lfseg::Error::io(&out, e))?;
    let (lf, gt) = synth_scene(&three_planes(9, 9, 128, 128))?;
    let g = *lf.geometry();
    let scribbles = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense()).rasterize()?;
    let source = DisparitySource::Given(DisparityMap::from_values(g.width, g.height, gt.disparity)?);
    let labels = segment(&lf, &source, &scribbles, &Params::default())?.view_labels();

    for (name, orientation, fixed) in [
        ("epi_h.png", Orientation::Horizontal, (g.central_v, g.height / 2)),
        ("epi_v.png", Orientation::Vertical, (g.central_u, g.width / 2)),
    ] {
        let strip = epi_strip(&lf, Some(&labels), orientation, fixed, 6)?;
        let path = out.join(name);
        save_png_rgb(&path, strip.width, strip.height, &strip.pixels)?;
        println!("{}x{} -> {}", strip.width, strip.height, path.display());
    }
    Ok(())
}
