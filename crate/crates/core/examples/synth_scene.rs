//! Renders the three-plane test scene and one corpus scene, writes them
//! with ground truth and synthetic scribbles, and reads one back.
//!
//! cargo run --release --example synth_scene -- [OUT_DIR]

use std::path::PathBuf;

use lfseg::io::{load_lightfield, save_ground_truth, save_lightfield, save_scribbles_png, write_json};
use lfseg::synth::{corpus_scene, scribbles_from_ground_truth, synth_scene, three_planes, visible_areas, ScribbleStyle};

fn main() -> lfseg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lfseg-synth"));

    for spec in [three_planes(9, 9, 128, 128), corpus_scene(4, 9, 9, 128, 128, 4.0)] {
        let (lf, gt) = synth_scene(&spec)?;
        let dir = out.join(&spec.name);
        save_lightfield(&dir, &lf)?;
        save_ground_truth(&dir, &gt)?;
        let strokes = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense());
        write_json(&dir.join("scribbles.json"), &strokes)?;
        save_scribbles_png(&dir.join("scribbles.png"), &strokes.rasterize()?)?;

        let g = lf.geometry();
        println!("{}: {}x{} views of {}x{}, {} rays", spec.name, g.u_count, g.v_count, g.width, g.height, g.ray_count());
        for (layer, area) in spec.layers.iter().zip(visible_areas(&spec)) {
            println!("  layer d={:+.2}  visible {area} px", layer.disparity);
        }
        println!("  {} strokes -> {}", strokes.strokes.len(), dir.display());

        let back = load_lightfield(&dir)?;
        assert_eq!(back.geometry(), lf.geometry());
    }
    Ok(())
}
