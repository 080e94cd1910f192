//! Evaluates the synthetic corpus with and without the smoothness term and
//! prints the accuracy table.
//!
//! cargo run --release --example ablation -- [NOISE]

use lfseg::disparity::DisparityMap;
use lfseg::eval::{table, EvalReport};
use lfseg::params::Params;
use lfseg::pipeline::{segment, DisparitySource};
use lfseg::synth::{corpus_scene, scribbles_from_ground_truth, synth_scene, ScribbleStyle};

fn main() -> lfseg::Result<()> {
    let noise: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8.0);
    let mut reports = Vec::new();
    for i in 0..10 {
        let spec = corpus_scene(i, 9, 9, 128, 128, noise);
        let (lf, gt) = synth_scene(&spec)?;
        let g = *lf.geometry();
        let scribbles = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense()).rasterize()?;
        let source = DisparitySource::Given(DisparityMap::from_values(g.width, g.height, gt.disparity.clone())?);
        let run = segment(&lf, &source, &scribbles, &Params::default())?;
        reports.push(EvalReport::from_run(&spec.name, &format!("gt, noise {noise}"), &run, &gt)?);
    }
    print!("{}", table(&reports));
    let gains: Vec<f64> = reports.iter().filter_map(|r| r.ablation).map(|a| a.gain()).collect();
    println!(
        "smoothing gain: mean {:+.3} pp, worst {:+.3} pp",
        gains.iter().sum::<f64>() / gains.len() as f64,
        gains.iter().copied().fold(f64::INFINITY, f64::min)
    );
    Ok(())
}
