//! Estimates central-view disparity from EPI structure tensors and compares
//! it with the ground truth of a few synthetic scenes.
//!
//! cargo run --release --example disparity

use lfseg::disparity::{estimate_disparity, TensorParams};
use lfseg::synth::{corpus_scene, single_plane, synth_scene};

fn main() -> lfseg::Result<()> {
    let params = TensorParams::default();
    println!("{:<10} {:>8} {:>8} {:>8}", "scene", "mean|e|", "median", "p95");
    let mut specs: Vec<_> = [-1.0, 0.5, 2.0].into_iter().map(|d| single_plane(9, 9, 96, 96, d)).collect();
    specs.extend((0..3).map(|i| corpus_scene(i, 9, 9, 128, 128, 0.0)));
    for spec in specs {
        let (lf, gt) = synth_scene(&spec)?;
        let est = estimate_disparity(&lf, &params)?;
        let mut err: Vec<f64> = est
            .values
            .iter()
            .zip(&gt.disparity)
            .map(|(a, b)| (a - b).abs() as f64)
            .collect();
        err.sort_by(f64::total_cmp);
        let mean = err.iter().sum::<f64>() / err.len() as f64;
        println!(
            "{:<10} {mean:>8.4} {:>8.4} {:>8.4}",
            spec.name,
            err[err.len() / 2],
            err[err.len() * 95 / 100]
        );
    }
    Ok(())
}
