//! Clusters a light field into superpixels and checks that each one covers
//! the same scene patch in every view.
//!
//! cargo run --release --example superpixels -- [OUT_DIR]

use std::path::PathBuf;

use lfseg::disparity::DisparityMap;
use lfseg::io::{save_png_rgb, save_segmentation};
use lfseg::lfsp::{compute_lfsp, LfspParams};
use lfseg::render::boundary_mask;
use lfseg::synth::{synth_scene, three_planes};

fn main() -> lfseg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lfseg-superpixels"));
    let (lf, gt) = synth_scene(&three_planes(9, 9, 128, 128))?;
    let g = *lf.geometry();
    let disparity = DisparityMap::from_values(g.width, g.height, gt.disparity.clone())?;

    for size in [10, 20, 40] {
        let params = LfspParams { size, ..LfspParams::default() };
        let seg = compute_lfsp(&lf, &disparity, &params)?;
        // Rays of one superpixel should carry one ground-truth label.
        let mut pure = 0;
        for id in 0..seg.count() as u32 {
            let mut seen = [false; 256];
            for (r, &a) in seg.assignment().iter().enumerate() {
                if a == id {
                    seen[gt.labels.labels[r] as usize] = true;
                }
            }
            if seen.iter().filter(|&&s| s).count() == 1 {
                pure += 1;
            }
        }
        println!("M={size:>2}: {:>4} superpixels, {pure} label-pure", seg.count());
        if size == 20 {
            save_segmentation(&out, &seg, &params)?;
            let mask = boundary_mask(seg.central(), g.width, g.height);
            let img: Vec<[u8; 3]> = lf
                .central_srgb()
                .iter()
                .zip(&mask)
                .map(|(&p, &b)| if b { [255, 255, 0] } else { p })
                .collect();
            save_png_rgb(&out.join("boundaries.png"), g.width, g.height, &img)?;
        }
    }
    println!("-> {}", out.display());
    Ok(())
}
