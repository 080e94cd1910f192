//! Builds the superpixel graph of a full-size light field and reports how
//! much smaller it is than a per-ray graph.
//!
//! cargo run --release --example graph -- [SIZE]

use lfseg::disparity::DisparityMap;
use lfseg::eval::graph_stats;
use lfseg::graph::{Adjacency, EdgeKind};
use lfseg::lfsp::{compute_lfsp, init_features, LfspParams};
use lfseg::synth::{synth_scene, three_planes};

fn main() -> lfseg::Result<()> {
    let size: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let (lf, gt) = synth_scene(&three_planes(9, 9, size, size))?;
    let g = *lf.geometry();
    let disparity = DisparityMap::from_values(g.width, g.height, gt.disparity)?;
    let seg = compute_lfsp(&lf, &disparity, &LfspParams::default())?;
    let features = init_features(&lf, &disparity, &seg)?;
    let adjacency = Adjacency::compute(&seg, &features)?;
    let stats = graph_stats(&adjacency, &g, 3);
    println!("rays            {}", stats.ray_count);
    println!("vertices        {} (+{} terminals)", stats.vertex_count, stats.terminal_count);
    println!("spatial edges   {}", stats.spatial_edges);
    println!("angular edges   {}", stats.angular_edges);
    println!("reduction       {:.0}x", stats.reduction);

    let widest = adjacency
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Angular)
        .max_by_key(|e| e.views.len());
    if let Some(e) = widest {
        println!("angular edge {}-{} is witnessed in {} views", e.a, e.b, e.views.len());
    }
    Ok(())
}
