//! Synthetic layered light fields with exact ground truth.
//!
//! A scene is a stack of fronto-parallel rectangles, each at a constant
//! disparity. View `(u, v)` sees the central-view point `(x, y)` of a layer
//! at `(x + d (u - u0), y + d (v - v0))`; where layers overlap the larger
//! disparity (nearer layer) wins. Rendering is done by inverse mapping each
//! view pixel back into every layer, using the same half-up rounding as the
//! superpixel propagation so that ground truth and projections agree.
//!
//! Layers whose rectangle touches the frame border are treated as extending
//! past it, so the background stays defined in views that look around it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::lab_to_rgb_f64;
use crate::error::{Error, Result};
use crate::lfsp::scribble::{Stroke, Strokes};
use crate::lightfield::{round_half_up, Geometry, GroundTruth, LightField, Metadata, ViewLabels};

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)` in the central view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Base CIELab color.
    pub color: [f64; 3],
    pub disparity: f64,
    pub rect: Rect,
    /// Amplitude of a smooth lightness pattern painted on the layer, in L
    /// units. Zero gives a flat color.
    #[serde(default)]
    pub texture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub layers: Vec<Layer>,
    pub u_count: usize,
    pub v_count: usize,
    pub width: usize,
    pub height: usize,
    /// Standard deviation of additive Gaussian noise, in sRGB byte units.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn geometry(&self) -> Geometry {
        Geometry::new(self.u_count, self.v_count, self.width, self.height)
    }
}

fn texture_value(layer_index: usize, amplitude: f64, xc: f64, yc: f64) -> f64 {
    if amplitude == 0.0 {
        return 0.0;
    }
    let k = layer_index as f64;
    let px = 9.0 + 3.0 * (layer_index % 4) as f64;
    let py = 11.0 + 2.0 * (layer_index % 3) as f64;
    let tau = std::f64::consts::TAU;
    let s = 0.4 * (tau * xc / px + 1.3 * k).sin()
        + 0.4 * (tau * yc / py + 0.7 * k).sin()
        + 0.2 * (tau * (xc + yc) / 23.0 + 2.1 * k).sin();
    amplitude * s
}

/// Renders a layered scene into a light field plus per-view ground truth.
pub fn synth_scene(spec: &SceneSpec) -> Result<(LightField, GroundTruth)> {
    let g = spec.geometry();
    g.validate()?;
    if spec.layers.is_empty() {
        return Err(Error::InvalidInput("scene has no layers".into()));
    }
    if spec.layers.len() > u8::MAX as usize {
        return Err(Error::InvalidInput("at most 255 layers are supported".into()));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma {} must be finite and non-negative",
            spec.noise_sigma
        )));
    }
    let max_shear = g.u_count.max(g.v_count) as f64 / 2.0;
    let limit = g.width.min(g.height) as f64 / 4.0;
    for (i, layer) in spec.layers.iter().enumerate() {
        let r = layer.rect;
        if r.x0 >= r.x1 || r.y0 >= r.y1 || r.x1 > g.width || r.y1 > g.height {
            return Err(Error::OutOfRange(format!(
                "layer {i} rectangle {r:?} is empty or outside the {}x{} image",
                g.width, g.height
            )));
        }
        if !layer.disparity.is_finite() || layer.disparity.abs() * max_shear >= limit {
            return Err(Error::OutOfRange(format!(
                "layer {i} disparity {} shears too far for a {}x{} grid of {}x{} views",
                layer.disparity, g.u_count, g.v_count, g.width, g.height
            )));
        }
    }

    // Nearest first; stable so equal disparities keep list order.
    let mut order: Vec<usize> = (0..spec.layers.len()).collect();
    order.sort_by(|&a, &b| {
        spec.layers[b]
            .disparity
            .partial_cmp(&spec.layers[a].disparity)
            .expect("finite disparities")
    });

    let layer_at = |x: usize, y: usize, du: f64, dv: f64| -> Option<(usize, f64, f64)> {
        for &i in &order {
            let layer = &spec.layers[i];
            let xc = x as f64 - layer.disparity * du;
            let yc = y as f64 - layer.disparity * dv;
            let ix = round_half_up(xc).clamp(0, g.width as i64 - 1) as usize;
            let iy = round_half_up(yc).clamp(0, g.height as i64 - 1) as usize;
            if layer.rect.contains(ix, iy) {
                return Some((i, xc, yc));
            }
        }
        None
    };

    let mut disparity = vec![0f32; g.pixels_per_view()];
    for y in 0..g.height {
        for x in 0..g.width {
            match layer_at(x, y, 0.0, 0.0) {
                Some((i, _, _)) => disparity[y * g.width + x] = spec.layers[i].disparity as f32,
                None => {
                    return Err(Error::InvalidInput(format!(
                        "central-view pixel ({x}, {y}) is not covered by any layer"
                    )))
                }
            }
        }
    }

    let views: Vec<(Vec<[u8; 3]>, Vec<u8>)> = (0..g.view_count())
        .into_par_iter()
        .map(|view| {
            let (du, dv) = g.view_offset(view);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (view as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let noise = (spec.noise_sigma > 0.0)
                .then(|| Normal::new(0.0, spec.noise_sigma).expect("valid sigma"));
            let mut srgb = Vec::with_capacity(g.pixels_per_view());
            let mut labels = Vec::with_capacity(g.pixels_per_view());
            for y in 0..g.height {
                for x in 0..g.width {
                    // Views far from the center may look past every layer;
                    // fall back to the farthest one.
                    let (i, xc, yc) = layer_at(x, y, du, dv).unwrap_or_else(|| {
                        let i = *order.last().expect("non-empty");
                        let d = spec.layers[i].disparity;
                        (i, x as f64 - d * du, y as f64 - d * dv)
                    });
                    let layer = &spec.layers[i];
                    let mut lab = layer.color;
                    lab[0] += texture_value(i, layer.texture, xc, yc);
                    let mut rgb = lab_to_rgb_f64(lab);
                    if let Some(n) = &noise {
                        for c in &mut rgb {
                            *c += n.sample(&mut rng);
                        }
                    }
                    srgb.push(rgb.map(|c| c.round().clamp(0.0, 255.0) as u8));
                    labels.push(i as u8 + 1);
                }
            }
            (srgb, labels)
        })
        .collect();

    let mut srgb = Vec::with_capacity(g.ray_count());
    let mut labels = Vec::with_capacity(g.ray_count());
    for (s, l) in views {
        srgb.extend(s);
        labels.extend(l);
    }
    let d_min = spec.layers.iter().map(|l| l.disparity).fold(f64::INFINITY, f64::min);
    let d_max = spec.layers.iter().map(|l| l.disparity).fold(f64::NEG_INFINITY, f64::max);
    let metadata = Metadata {
        name: spec.name.clone(),
        d_min: d_min - 0.5,
        d_max: d_max + 0.5,
    };
    let lf = LightField::from_srgb(g, metadata, srgb)?;
    let gt = GroundTruth {
        labels: ViewLabels::new(g, labels)?,
        disparity,
        num_labels: spec.layers.len() as u8,
    };
    Ok((lf, gt))
}

/// Well-separated CIELab colors used by the presets.
pub const PRESET_COLORS: [[f64; 3]; 8] = [
    [55.0, 55.0, 35.0],
    [70.0, -50.0, 40.0],
    [40.0, 15.0, -55.0],
    [88.0, -8.0, 75.0],
    [35.0, 45.0, -30.0],
    [78.0, -35.0, -25.0],
    [25.0, 5.0, 10.0],
    [65.0, 30.0, 65.0],
];

/// Background plus two overlapping planes at increasing disparity.
pub fn three_planes(u_count: usize, v_count: usize, width: usize, height: usize) -> SceneSpec {
    let w = width;
    let h = height;
    SceneSpec {
        name: "three-planes".into(),
        layers: vec![
            Layer {
                color: PRESET_COLORS[2],
                disparity: 0.0,
                rect: Rect::full(w, h),
                texture: 8.0,
            },
            Layer {
                color: PRESET_COLORS[1],
                disparity: 1.0,
                rect: Rect::new(w / 8, h / 6, w * 5 / 8, h * 3 / 4),
                texture: 8.0,
            },
            Layer {
                color: PRESET_COLORS[0],
                disparity: 2.0,
                rect: Rect::new(w / 2, h / 3, w * 7 / 8, h * 5 / 6),
                texture: 8.0,
            },
        ],
        u_count,
        v_count,
        width,
        height,
        noise_sigma: 0.0,
        seed: 0,
    }
}

/// A single textured plane filling the frame.
pub fn single_plane(
    u_count: usize,
    v_count: usize,
    width: usize,
    height: usize,
    disparity: f64,
) -> SceneSpec {
    SceneSpec {
        name: format!("plane-{disparity}"),
        layers: vec![Layer {
            color: [50.0, 10.0, -10.0],
            disparity,
            rect: Rect::full(width, height),
            texture: 20.0,
        }],
        u_count,
        v_count,
        width,
        height,
        noise_sigma: 0.0,
        seed: 0,
    }
}

/// Visible area of each layer in the central view.
pub fn visible_areas(spec: &SceneSpec) -> Vec<usize> {
    let mut areas = vec![0; spec.layers.len()];
    for l in central_owner(spec) {
        if l != usize::MAX {
            areas[l] += 1;
        }
    }
    areas
}

/// Scene `index` of the seeded evaluation corpus: a textured background and
/// two to four nearer rectangles with distinct colors and disparities.
pub fn corpus_scene(
    index: u64,
    u_count: usize,
    v_count: usize,
    width: usize,
    height: usize,
    noise_sigma: f64,
) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + index);
    let layer_count = 3 + (index % 3) as usize;
    let min_side = width.min(height);
    loop {
        let mut colors: Vec<usize> = (0..PRESET_COLORS.len()).collect();
        for i in (1..colors.len()).rev() {
            colors.swap(i, rng.random_range(0..=i));
        }
        let mut layers = vec![Layer {
            color: PRESET_COLORS[colors[0]],
            disparity: rng.random_range(-0.5..=0.5),
            rect: Rect::full(width, height),
            texture: 8.0,
        }];
        let mut d = layers[0].disparity;
        for k in 1..layer_count {
            d += rng.random_range(0.3..=0.6);
            let rw = rng.random_range(min_side * 5 / 16..=min_side / 2);
            let rh = rng.random_range(min_side * 5 / 16..=min_side / 2);
            let margin = min_side / 16;
            let x0 = rng.random_range(margin..=width - margin - rw);
            let y0 = rng.random_range(margin..=height - margin - rh);
            layers.push(Layer {
                color: PRESET_COLORS[colors[k]],
                disparity: d,
                rect: Rect::new(x0, y0, x0 + rw, y0 + rh),
                texture: 8.0,
            });
        }
        let spec = SceneSpec {
            name: format!("corpus-{index}"),
            layers,
            u_count,
            v_count,
            width,
            height,
            noise_sigma,
            seed: index,
        };
        // Every layer must stay visible enough to scribble on.
        let min_area = (min_side * min_side) / 24;
        let areas = visible_areas(&spec);
        if areas.iter().all(|&a| a >= min_area) {
            return spec;
        }
    }
}

/// Index of the layer seen at every central-view pixel (`usize::MAX` for
/// none).
fn central_owner(spec: &SceneSpec) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spec.layers.len()).collect();
    order.sort_by(|&a, &b| {
        spec.layers[b]
            .disparity
            .partial_cmp(&spec.layers[a].disparity)
            .expect("finite")
    });
    (0..spec.width * spec.height)
        .map(|i| {
            let (x, y) = (i % spec.width, i / spec.width);
            order
                .iter()
                .copied()
                .find(|&l| spec.layers[l].rect.contains(x, y))
                .unwrap_or(usize::MAX)
        })
        .collect()
}

/// How the synthetic user scribbles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScribbleStyle {
    /// Distance kept from region borders (halved until the region fits).
    pub margin: usize,
    pub radius: f64,
    /// Rows (and columns, with `cross`) stroked per region.
    pub lines: usize,
    /// Also stroke vertically.
    pub cross: bool,
}

impl ScribbleStyle {
    /// A careful user: five rows and five columns through every region.
    pub fn dense() -> Self {
        Self {
            margin: 4,
            radius: 2.0,
            lines: 5,
            cross: true,
        }
    }

    /// A hasty user: one horizontal line per region.
    pub fn sparse() -> Self {
        Self {
            margin: 4,
            radius: 2.0,
            lines: 1,
            cross: false,
        }
    }
}

impl Default for ScribbleStyle {
    fn default() -> Self {
        Self::dense()
    }
}

/// Pushes one stroke per run of `mask` along the line `fixed`.
fn stroke_runs(mask: &[bool], w: usize, h: usize, fixed: usize, vertical: bool, label: u8, radius: f64, out: &mut Vec<Stroke>) {
    let len = if vertical { h } else { w };
    let at = |t: usize| if vertical { mask[t * w + fixed] } else { mask[fixed * w + t] };
    let point = |t: usize| if vertical { [fixed as f64, t as f64] } else { [t as f64, fixed as f64] };
    let mut t = 0;
    while t < len {
        if !at(t) {
            t += 1;
            continue;
        }
        let start = t;
        while t < len && at(t) {
            t += 1;
        }
        out.push(Stroke {
            label,
            radius,
            points: vec![point(start), point(t - 1)],
        });
    }
}

/// Stand-in for a user: straight strokes through the eroded interior of
/// every ground-truth region of the central view, one stroke per run so
/// that disconnected parts of a region are all reached.
pub fn scribbles_from_ground_truth(gt: &GroundTruth, style: &ScribbleStyle) -> Strokes {
    let g = gt.labels.geometry;
    let (w, h) = (g.width, g.height);
    let central = gt.labels.central();
    let lines = style.lines.max(1);
    let mut strokes = Vec::new();
    for label in 1..=gt.num_labels {
        let mut m = style.margin;
        loop {
            let eroded: Vec<bool> = (0..w * h)
                .map(|i| {
                    let (x, y) = (i % w, i / w);
                    if central[i] != label || x < m || y < m || x + m >= w || y + m >= h {
                        return false;
                    }
                    (y - m..=y + m).all(|yy| (x - m..=x + m).all(|xx| central[yy * w + xx] == label))
                })
                .collect();
            let rows: Vec<usize> = (0..h).filter(|&y| (0..w).any(|x| eroded[y * w + x])).collect();
            if rows.is_empty() {
                if m == 0 {
                    break;
                }
                m /= 2;
                continue;
            }
            let pick = |v: &[usize]| {
                let mut p: Vec<usize> = (1..=lines).map(|k| v[v.len() * k / (lines + 1)]).collect();
                p.dedup();
                p
            };
            for y in pick(&rows) {
                stroke_runs(&eroded, w, h, y, false, label, style.radius, &mut strokes);
            }
            if style.cross {
                let cols: Vec<usize> = (0..w).filter(|&x| (0..h).any(|y| eroded[y * w + x])).collect();
                for x in pick(&cols) {
                    stroke_runs(&eroded, w, h, x, true, label, style.radius, &mut strokes);
                }
            }
            break;
        }
    }
    Strokes {
        width: w,
        height: h,
        strokes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_disparity_views_are_identical() {
        let spec = SceneSpec {
            name: "flat".into(),
            layers: vec![Layer {
                color: [50.0, 0.0, 0.0],
                disparity: 0.0,
                rect: Rect::full(16, 12),
                texture: 10.0,
            }],
            u_count: 3,
            v_count: 3,
            width: 16,
            height: 12,
            noise_sigma: 0.0,
            seed: 0,
        };
        let (lf, gt) = synth_scene(&spec).unwrap();
        let c = lf.central_srgb().to_vec();
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(lf.view_srgb(u, v), &c[..]);
            }
        }
        assert!(gt.disparity.iter().all(|&d| d == 0.0));
        assert!(gt.labels.labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn foreground_shifts_by_view_offset() {
        let spec = SceneSpec {
            name: "two".into(),
            layers: vec![
                Layer {
                    color: [30.0, 0.0, 0.0],
                    disparity: 0.0,
                    rect: Rect::full(32, 32),
                    texture: 0.0,
                },
                Layer {
                    color: [80.0, 0.0, 0.0],
                    disparity: 1.0,
                    rect: Rect::new(10, 12, 20, 18),
                    texture: 0.0,
                },
            ],
            u_count: 5,
            v_count: 5,
            width: 32,
            height: 32,
            noise_sigma: 0.0,
            seed: 0,
        };
        let (_, gt) = synth_scene(&spec).unwrap();
        for u in 0..5usize {
            for v in 0..5usize {
                let view = gt.labels.view(u, v);
                let (du, dv) = (u as i64 - 2, v as i64 - 2);
                for y in 0..32i64 {
                    for x in 0..32i64 {
                        let inside = (10 + du..20 + du).contains(&x) && (12 + dv..18 + dv).contains(&y);
                        let expect = if inside { 2 } else { 1 };
                        assert_eq!(view[(y * 32 + x) as usize], expect, "view ({u},{v}) pixel ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = three_planes(3, 3, 32, 32);
        spec.layers.clear();
        assert!(synth_scene(&spec).is_err());
        let mut spec = three_planes(3, 3, 32, 32);
        spec.layers[1].rect = Rect::new(10, 10, 40, 20);
        assert!(matches!(synth_scene(&spec), Err(Error::OutOfRange(_))));
        let mut spec = three_planes(9, 9, 32, 32);
        spec.layers[2].disparity = 2.0;
        assert!(matches!(synth_scene(&spec), Err(Error::OutOfRange(_))));
        let mut spec = three_planes(3, 3, 32, 32);
        spec.layers[0].rect = Rect::new(0, 0, 31, 32);
        spec.layers.truncate(1);
        assert!(matches!(synth_scene(&spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn corpus_is_deterministic_and_valid() {
        for i in 0..10 {
            let a = corpus_scene(i, 9, 9, 128, 128, 4.0);
            let b = corpus_scene(i, 9, 9, 128, 128, 4.0);
            assert_eq!(a, b);
            assert!((3..=5).contains(&a.layers.len()));
        }
    }

    #[test]
    fn noise_is_seeded() {
        let mut spec = three_planes(3, 3, 24, 24);
        spec.noise_sigma = 4.0;
        let (a, _) = synth_scene(&spec).unwrap();
        let (b, _) = synth_scene(&spec).unwrap();
        assert_eq!(a.srgb(), b.srgb());
        spec.noise_sigma = 0.0;
        let (c, _) = synth_scene(&spec).unwrap();
        assert_ne!(a.srgb(), c.srgb());
    }

    #[test]
    fn generated_scribbles_stay_inside_their_region() {
        let spec = three_planes(3, 3, 64, 64);
        let (_, gt) = synth_scene(&spec).unwrap();
        let strokes = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense());
        let map = strokes.rasterize().unwrap();
        assert_eq!(map.label_count, 3);
        let central = gt.labels.central();
        for (i, &l) in map.labels.iter().enumerate() {
            if l != 0 {
                assert_eq!(l, central[i]);
            }
        }
    }
}
