//! Brute-force oracles shared by the integration tests and the acceptance
//! target. Each one recomputes a quantity from its definition, without the
//! library's caching, normalization helpers or spatial hashing.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use lfseg::disparity::DisparityMap;
use lfseg::energy::{
    compute_unary, edge_similarity, total_energy, ColorNorm, EnergyParams, SeedAggregation, SimilarityScales, HARD,
};
use lfseg::graph::{Adjacency, Edge, EdgeKind, LfspGraph};
use lfseg::lfsp::{init_features, LfspFeature, LfspSegmentation, SeedSet, SliceStats};
use lfseg::lightfield::{Geometry, LightField, Metadata};
use lfseg::maxflow::FlowNetwork;
use lfseg::optimizer::LabelField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// A feature with a single (central) view.
pub fn feature(color: [f64; 3], position: [f64; 2], disparity: f64) -> LfspFeature {
    LfspFeature {
        views: vec![SliceStats {
            pixel_count: 1,
            color,
            position,
        }],
        disparity,
        color,
        position,
        central_view: 0,
    }
}

pub fn random_features(rng: &mut impl Rng, n: usize) -> Vec<LfspFeature> {
    (0..n)
        .map(|_| {
            feature(
                [rng.random_range(0.0..100.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)],
                [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)],
                rng.random_range(-2.0..3.0),
            )
        })
        .collect()
}

/// Seeds: every label gets at least one superpixel, some get two.
pub fn random_seeds(rng: &mut impl Rng, n: usize, k: u8) -> SeedSet {
    let mut ids: Vec<u32> = (0..n as u32).collect();
    let mut seeds = BTreeMap::new();
    for l in 1..=k {
        let extra = if ids.len() > (k as usize) + 1 && rng.random_bool(0.4) { 2 } else { 1 };
        for _ in 0..extra {
            let pick = rng.random_range(0..ids.len());
            seeds.insert(ids.swap_remove(pick), l);
        }
    }
    SeedSet { seeds, label_count: k }
}

pub fn random_params(rng: &mut impl Rng) -> EnergyParams {
    EnergyParams {
        lambda_p: rng.random_range(0.0..2.0),
        lambda_d: rng.random_range(0.0..2.0),
        lambda_s: rng.random_range(0.0..12.0),
        lambda_a: rng.random_range(0.0..4.0),
        alpha: rng.random_range(0.2..5.0),
        color_norm: if rng.random_bool(0.3) { ColorNorm::L2 } else { ColorNorm::L1 },
        seed_aggregation: if rng.random_bool(0.3) { SeedAggregation::Mean } else { SeedAggregation::Min },
        ..EnergyParams::default()
    }
}

/// Data cost of superpixel `i` for label `l` straight from the definition:
/// the three raw cue distances to each seed, min-max normalized over all
/// (unlabeled, seed) pairs, weighted, then the best seed of the label.
pub fn unary_oracle(f: &[LfspFeature], seeds: &SeedSet, p: &EnergyParams) -> Vec<Vec<f64>> {
    let k = seeds.label_count as usize;
    let cues = |i: usize, s: usize| -> [f64; 3] {
        let (a, b) = (&f[i].views[f[i].central_view], &f[s].views[f[s].central_view]);
        let color = match p.color_norm {
            ColorNorm::L1 => (a.color[0] - b.color[0]).abs() + (a.color[1] - b.color[1]).abs() + (a.color[2] - b.color[2]).abs(),
            ColorNorm::L2 => ((a.color[0] - b.color[0]).powi(2) + (a.color[1] - b.color[1]).powi(2) + (a.color[2] - b.color[2]).powi(2)).sqrt(),
        };
        let pos = (a.position[0] - b.position[0]).hypot(a.position[1] - b.position[1]);
        [color, pos, (f[i].disparity - f[s].disparity).abs()]
    };
    let free: Vec<usize> = (0..f.len()).filter(|i| !seeds.seeds.contains_key(&(*i as u32))).collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &free {
        for &s in seeds.seeds.keys() {
            let c = cues(i, s as usize);
            for q in 0..3 {
                lo[q] = lo[q].min(c[q]);
                hi[q] = hi[q].max(c[q]);
            }
        }
    }
    let norm = |q: usize, v: f64| if hi[q] > lo[q] { (v - lo[q]) / (hi[q] - lo[q]) } else { 0.0 };
    (0..f.len())
        .map(|i| {
            (1..=k as u8)
                .map(|l| match seeds.seeds.get(&(i as u32)) {
                    Some(&own) if own == l => 0.0,
                    Some(_) => HARD,
                    None => {
                        let per_seed: Vec<f64> = seeds
                            .seeds
                            .iter()
                            .filter(|(_, &sl)| sl == l)
                            .map(|(&s, _)| {
                                let c = cues(i, s as usize);
                                norm(0, c[0]) + p.lambda_p * norm(1, c[1]) + p.lambda_d * norm(2, c[2])
                            })
                            .collect();
                        match p.seed_aggregation {
                            SeedAggregation::Min => per_seed.iter().copied().fold(f64::INFINITY, f64::min),
                            SeedAggregation::Mean => per_seed.iter().sum::<f64>() / per_seed.len() as f64,
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Population variances of central color (summed over channels) and
/// disparity, by the two-pass formula.
pub fn variance_oracle(f: &[LfspFeature]) -> (f64, f64) {
    let n = f.len() as f64;
    let var = |vals: Vec<f64>| {
        let m = vals.iter().sum::<f64>() / n;
        vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
    };
    let c: f64 = (0..3).map(|q| var(f.iter().map(|x| x.views[x.central_view].color[q]).collect())).sum();
    (c, var(f.iter().map(|x| x.disparity).collect()))
}

pub fn similarity_oracle(a: &LfspFeature, b: &LfspFeature, sc2: f64, sd2: f64, alpha: f64) -> f64 {
    let (ca, cb) = (a.views[a.central_view].color, b.views[b.central_view].color);
    let dc = (ca[0] - cb[0]).abs() + (ca[1] - cb[1]).abs() + (ca[2] - cb[2]).abs();
    (-(dc / sc2) - alpha * (a.disparity - b.disparity).abs() / sd2).exp()
}

pub fn energy_oracle(labels: &[u8], rows: &[Vec<f64>], edges: &[Edge], p: &EnergyParams) -> f64 {
    let data: f64 = labels.iter().enumerate().map(|(i, &l)| rows[i][l as usize - 1]).sum();
    let smooth: f64 = edges
        .iter()
        .map(|e| {
            let cut = labels[e.a as usize] != labels[e.b as usize];
            let w = if e.kind == EdgeKind::Spatial { p.lambda_s } else { p.lambda_a };
            if cut {
                w * e.weight
            } else {
                0.0
            }
        })
        .sum();
    data + smooth
}

pub fn random_edges(rng: &mut impl Rng, n: usize, weights: impl Fn(usize, usize) -> f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.3) {
                edges.push(Edge {
                    a: a as u32,
                    b: b as u32,
                    kind: if rng.random_bool(0.6) { EdgeKind::Spatial } else { EdgeKind::Angular },
                    views: vec![0],
                    weight: weights(a, b),
                });
            }
        }
    }
    edges
}

/// Per-view slice means and central mean disparity, accumulated ray by ray
/// in reverse order with the 4D index decoded by hand.
pub fn features_oracle(lf: &LightField, disp: &DisparityMap, seg: &LfspSegmentation) -> Vec<LfspFeature> {
    let g = *lf.geometry();
    let n = seg.count();
    let views = g.view_count();
    let mut cnt = vec![vec![0usize; views]; n];
    let mut sum = vec![vec![[0f64; 5]; views]; n];
    let lab = lf.lab();
    for r in (0..g.ray_count()).rev() {
        let view = r / (g.width * g.height);
        let pix = r % (g.width * g.height);
        let id = seg.assignment()[r] as usize;
        cnt[id][view] += 1;
        let s = &mut sum[id][view];
        for q in 0..3 {
            s[q] += lab[r][q] as f64;
        }
        s[3] += (pix % g.width) as f64;
        s[4] += (pix / g.width) as f64;
    }
    let central = g.central_view();
    (0..n)
        .map(|id| {
            let stats: Vec<SliceStats> = (0..views)
                .map(|v| {
                    let c = cnt[id][v];
                    if c == 0 {
                        return SliceStats::default();
                    }
                    let s = sum[id][v];
                    let c = c as f64;
                    SliceStats {
                        pixel_count: cnt[id][v],
                        color: [s[0] / c, s[1] / c, s[2] / c],
                        position: [s[3] / c, s[4] / c],
                    }
                })
                .collect();
            let mut dsum = 0.0;
            let mut dn = 0usize;
            for (p, &a) in seg.central().iter().enumerate() {
                if a as usize == id {
                    dsum += disp.values[p] as f64;
                    dn += 1;
                }
            }
            LfspFeature {
                views: stats,
                disparity: if dn > 0 { dsum / dn as f64 } else { 0.0 },
                color: [0.0; 3],
                position: [0.0; 2],
                central_view: central,
            }
        })
        .collect()
}

/// Checks `compute_unary`, `edge_similarity`, the variance scales,
/// `total_energy` and `init_features` against the oracles on `cases`
/// randomized instances. Returns the largest relative error seen.
pub fn check_formulas(cases: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    let mut note = |what: &str, case: usize, got: f64, want: f64| -> Result<(), String> {
        let e = rel_err(got, want);
        worst = worst.max(e);
        if e > 1e-9 {
            Err(format!("{what} case {case}: got {got}, oracle {want}"))
        } else {
            Ok(())
        }
    };
    for case in 0..cases {
        let n = rng.random_range(4..14);
        let k = rng.random_range(2..=4u8).min(n as u8 - 1);
        let f = random_features(&mut rng, n);
        let seeds = random_seeds(&mut rng, n, k);
        let p = random_params(&mut rng);

        let unary = compute_unary(&f, &seeds, &p).map_err(|e| e.to_string())?;
        let rows = unary_oracle(&f, &seeds, &p);
        for i in 0..n {
            for l in 1..=k {
                note("compute_unary", case, unary.cost(i, l), rows[i][l as usize - 1])?;
            }
        }

        let (vc, vd) = variance_oracle(&f);
        let scales = SimilarityScales::from_features(&f, &p);
        note("sigma_c2", case, scales.sigma_c2, vc)?;
        note("sigma_d2", case, scales.sigma_d2, vd)?;
        for _ in 0..5 {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            note(
                "edge_similarity",
                case,
                edge_similarity(&f[a], &f[b], &scales),
                similarity_oracle(&f[a], &f[b], vc, vd, p.alpha),
            )?;
        }

        let edges = random_edges(&mut rng, n, |a, b| similarity_oracle(&f[a], &f[b], vc, vd, p.alpha));
        let graph = LfspGraph {
            lfsp_count: n,
            seeds: seeds.clone(),
            edges: edges.clone(),
        };
        for _ in 0..5 {
            let labels: Vec<u8> = (0..n)
                .map(|i| seeds.label_of(i as u32).unwrap_or_else(|| rng.random_range(1..=k)))
                .collect();
            let e = total_energy(&LabelField::new(labels.clone(), k), &unary, &graph, &p).map_err(|e| e.to_string())?;
            note("total_energy", case, e, energy_oracle(&labels, &rows, &edges, &p))?;
        }

        if case % 4 == 0 {
            let (lf, disp, seg) = random_segmented_field(&mut rng);
            let got = init_features(&lf, &disp, &seg).map_err(|e| e.to_string())?;
            let want = features_oracle(&lf, &disp, &seg);
            for (id, (a, b)) in got.iter().zip(&want).enumerate() {
                note("init_features disparity", case, a.disparity, b.disparity)?;
                for (v, (sa, sb)) in a.views.iter().zip(&b.views).enumerate() {
                    if sa.pixel_count != sb.pixel_count {
                        return Err(format!("init_features case {case}: lfsp {id} view {v} pixel count"));
                    }
                    for q in 0..3 {
                        note("init_features color", case, sa.color[q], sb.color[q])?;
                    }
                    for q in 0..2 {
                        note("init_features position", case, sa.position[q], sb.position[q])?;
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// A small random light field with a random (non-spatially coherent)
/// superpixel assignment and random disparity.
pub fn random_segmented_field(rng: &mut impl Rng) -> (LightField, DisparityMap, LfspSegmentation) {
    let g = Geometry::new(3, 3, rng.random_range(4..12), rng.random_range(4..12));
    let srgb: Vec<[u8; 3]> = (0..g.ray_count()).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let meta = Metadata {
        name: "random".into(),
        d_min: -1.0,
        d_max: 1.0,
    };
    let lf = LightField::from_srgb(g, meta, srgb).unwrap();
    let count = rng.random_range(2..7u32);
    let mut assignment: Vec<u32> = (0..g.ray_count()).map(|_| rng.random_range(0..count)).collect();
    assignment[..count as usize].copy_from_slice(&(0..count).collect::<Vec<_>>());
    let seg = LfspSegmentation::from_assignment(g, assignment, 4).unwrap();
    let disp = DisparityMap::from_values(
        g.width,
        g.height,
        (0..g.pixels_per_view()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    (lf, disp, seg)
}

/// Spatial and angular pair sets by testing every pair in every view.
pub fn adjacency_oracle(
    features: &[LfspFeature],
    size: usize,
    views: usize,
    central: usize,
) -> (BTreeSet<(u32, u32)>, BTreeMap<(u32, u32), Vec<usize>>) {
    let r = std::f64::consts::SQRT_2 * size as f64;
    let close = |v: usize| {
        let mut out = BTreeSet::new();
        for a in 0..features.len() {
            for b in a + 1..features.len() {
                let (sa, sb) = (&features[a].views[v], &features[b].views[v]);
                if sa.pixel_count == 0 || sb.pixel_count == 0 {
                    continue;
                }
                let d = (sa.position[0] - sb.position[0]).hypot(sa.position[1] - sb.position[1]);
                if d <= r {
                    out.insert((a as u32, b as u32));
                }
            }
        }
        out
    };
    let spatial = close(central);
    let mut angular: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for v in (0..views).filter(|&v| v != central) {
        for pair in close(v) {
            if !spatial.contains(&pair) {
                angular.entry(pair).or_default().push(v);
            }
        }
    }
    (spatial, angular)
}

/// Compares an adjacency with the oracle and checks the two edge sets are
/// disjoint. Returns (spatial, angular) edge counts.
pub fn check_adjacency(adj: &Adjacency, seg: &LfspSegmentation, features: &[LfspFeature]) -> Result<(usize, usize), String> {
    let g = seg.geometry();
    let (spatial, angular) = adjacency_oracle(features, seg.size(), g.view_count(), g.central_view());
    let got_s: BTreeSet<(u32, u32)> = adj
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Spatial)
        .map(|e| (e.a, e.b))
        .collect();
    let got_a: BTreeMap<(u32, u32), Vec<usize>> = adj
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Angular)
        .map(|e| ((e.a, e.b), e.views.clone()))
        .collect();
    if got_s != spatial {
        return Err(format!(
            "spatial: {} edges, oracle {} (only in result {:?}, only in oracle {:?})",
            got_s.len(),
            spatial.len(),
            got_s.difference(&spatial).take(5).collect::<Vec<_>>(),
            spatial.difference(&got_s).take(5).collect::<Vec<_>>()
        ));
    }
    if got_a != angular {
        return Err(format!("angular: {} edges, oracle {}", got_a.len(), angular.len()));
    }
    if got_s.iter().any(|p| got_a.contains_key(p)) {
        return Err("an edge is both spatial and angular".into());
    }
    let total = adj.edges.len();
    if total != got_s.len() + got_a.len() {
        return Err("duplicate edges".into());
    }
    Ok((got_s.len(), got_a.len()))
}

/// Minimum s-t cut by enumerating every partition of the inner nodes.
pub fn exhaustive_min_cut(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (n - 2)) {
        let side = |v: usize| v == 0 || (v != n - 1 && mask >> (v - 1) & 1 == 1);
        let cut: f64 = edges.iter().filter(|&&(a, b, _)| side(a) && !side(b)).map(|e| e.2).sum();
        best = best.min(cut);
    }
    best
}

pub fn random_network(rng: &mut impl Rng) -> (FlowNetwork, usize, Vec<(usize, usize, f64)>) {
    let n = rng.random_range(2..=10);
    let m = rng.random_range(0..40);
    let edges: Vec<(usize, usize, f64)> = (0..m)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..=20) as f64))
        .filter(|(a, b, _)| a != b)
        .collect();
    let mut net = FlowNetwork::new(n, 0, n - 1).unwrap();
    for &(a, b, c) in &edges {
        net.add_edge(a, b, c, 0.0);
    }
    (net, n, edges)
}

/// Lowest energy over all labelings that keep seeds at their labels.
pub fn exhaustive_minimum(rows: &[Vec<f64>], graph: &LfspGraph, p: &EnergyParams) -> f64 {
    let n = rows.len();
    let k = graph.seeds.label_count as usize;
    let mut labels = vec![1u8; n];
    let mut best = f64::INFINITY;
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = (c % k) as u8 + 1;
            c /= k;
        }
        if graph.seeds.seeds.iter().any(|(&s, &l)| labels[s as usize] != l) {
            continue;
        }
        best = best.min(energy_oracle(&labels, rows, &graph.edges, p));
    }
    best
}

/// A random instance for `minimize`: unary table with seeds, weighted edges.
pub fn random_instance(rng: &mut impl Rng, n: usize, k: u8) -> (lfseg::energy::UnaryCosts, LfspGraph, Vec<Vec<f64>>) {
    let seeds = random_seeds(rng, n, k);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (1..=k)
                .map(|l| match seeds.label_of(i as u32) {
                    Some(own) if own == l => 0.0,
                    Some(_) => HARD,
                    None => rng.random_range(0.0..3.0),
                })
                .collect()
        })
        .collect();
    let unary = lfseg::energy::UnaryCosts::from_rows(k, rows.clone(), &seeds).unwrap();
    let edges = random_edges(rng, n, |_, _| 0.0);
    let edges = edges
        .into_iter()
        .map(|mut e| {
            e.weight = rng.random_range(0.01..1.0);
            e
        })
        .collect();
    let graph = LfspGraph::new(Adjacency { lfsp_count: n, edges }, seeds).unwrap();
    (unary, graph, rows)
}
