//! Central-view disparity.
//!
//! Disparity is measured in pixels per unit view step and is positive when a
//! feature moves towards `+x` as `u` grows. The estimator fits a structure
//! tensor to the horizontal EPI through the central view row and to the
//! vertical EPI through the central view column, then keeps whichever
//! orientation is more coherent. Ground-truth maps load from PFM.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::{Geometry, LightField};

/// Per-pixel disparity of the central view with a confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub confidence: Vec<f32>,
}

impl DisparityMap {
    pub fn constant(width: usize, height: usize, d: f32) -> Self {
        Self {
            width,
            height,
            values: vec![d; width * height],
            confidence: vec![1.0; width * height],
        }
    }

    /// Trusted values with confidence 1.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} disparity values for a {width}x{height} view",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite disparity at pixel ({}, {}) (index {i})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            confidence: vec![1.0; values.len()],
            values,
        })
    }

    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn range(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Smoothing scales of the EPI structure tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensorParams {
    /// Gaussian applied to the EPI before differentiation.
    pub inner_sigma: f64,
    /// Gaussian applied to the tensor components.
    pub outer_sigma: f64,
    pub epsilon: f64,
}

impl Default for TensorParams {
    fn default() -> Self {
        Self {
            inner_sigma: 0.8,
            outer_sigma: 2.0,
            epsilon: 1e-9,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// A small row-major image of `rows x cols` used for one EPI.
struct Plane {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Plane {
    #[inline]
    fn at(&self, r: i64, c: i64) -> f64 {
        let r = r.clamp(0, self.rows as i64 - 1) as usize;
        let c = c.clamp(0, self.cols as i64 - 1) as usize;
        self.data[r * self.cols + c]
    }

    /// Separable correlation. Columns use replicated borders; along rows
    /// (the short view axis) only taps on rows marked in `valid` contribute
    /// and the kernel is renormalized over them, so borders do not flatten
    /// the view-axis gradient. A `None` mask keeps plain replication, which
    /// is what derivative kernels need.
    fn filter(&self, along_cols: &[f64], along_rows: &[f64], valid: Option<&[bool]>) -> Plane {
        let rc = (along_cols.len() / 2) as i64;
        let rr = (along_rows.len() / 2) as i64;
        let mut tmp = Plane {
            rows: self.rows,
            cols: self.cols,
            data: vec![0.0; self.data.len()],
        };
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut s = 0.0;
                for (k, w) in along_cols.iter().enumerate() {
                    s += w * self.at(r as i64, c as i64 + k as i64 - rc);
                }
                tmp.data[r * self.cols + c] = s;
            }
        }
        let mut out = Plane {
            rows: self.rows,
            cols: self.cols,
            data: vec![0.0; self.data.len()],
        };
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (mut s, mut norm) = (0.0, 0.0);
                for (k, w) in along_rows.iter().enumerate() {
                    let rk = r as i64 + k as i64 - rr;
                    match valid {
                        None => s += w * tmp.at(rk, c as i64),
                        Some(mask) => {
                            if rk >= 0 && (rk as usize) < self.rows && mask[rk as usize] {
                                s += w * tmp.at(rk, c as i64);
                                norm += w;
                            }
                        }
                    }
                }
                out.data[r * self.cols + c] = match valid {
                    None => s,
                    Some(_) if norm > 0.0 => s / norm,
                    Some(_) => 0.0,
                };
            }
        }
        out
    }

    fn map2(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

const SCHARR_DIFF: [f64; 3] = [-0.5, 0.0, 0.5];
const SCHARR_SMOOTH: [f64; 3] = [3.0 / 16.0, 10.0 / 16.0, 3.0 / 16.0];

/// Slope estimate and coherence for every column of EPI row `center`.
/// EPI rows are views, columns are pixels.
fn epi_slopes(epi: &Plane, center: usize, params: &TensorParams) -> Vec<(f64, f64)> {
    let inner = gaussian_kernel(params.inner_sigma);
    let outer = gaussian_kernel(params.outer_sigma);
    let all = vec![true; epi.rows];
    // The view-axis derivative is one-sided on the first and last view.
    let interior: Vec<bool> = (0..epi.rows).map(|r| r > 0 && r + 1 < epi.rows).collect();
    let smooth = epi.filter(&inner, &[1.0], Some(&all));
    let gx = smooth.filter(&SCHARR_DIFF, &SCHARR_SMOOTH, Some(&all));
    let gu = smooth.filter(&SCHARR_SMOOTH, &SCHARR_DIFF, None);
    let jxx = gx.map2(&gx, |a, b| a * b).filter(&outer, &outer, Some(&interior));
    let juu = gu.map2(&gu, |a, b| a * b).filter(&outer, &outer, Some(&interior));
    let jxu = gx.map2(&gu, |a, b| a * b).filter(&outer, &outer, Some(&interior));
    (0..epi.cols)
        .map(|c| {
            let i = center * epi.cols + c;
            let (xx, uu, xu) = (jxx.data[i], juu.data[i], jxu.data[i]);
            // The dominant eigenvector is the gradient direction (1, -d).
            let theta = 0.5 * (2.0 * xu).atan2(xx - uu);
            let d = -theta.tan();
            let coherence = ((xx - uu).powi(2) + 4.0 * xu * xu).sqrt() / (xx + uu + params.epsilon);
            (d, coherence.clamp(0.0, 1.0))
        })
        .collect()
}

/// Structure-tensor disparity of the central view, clamped to the light
/// field's disparity range.
pub fn estimate_disparity(lf: &LightField, params: &TensorParams) -> Result<DisparityMap> {
    let g = *lf.geometry();
    if g.u_count < 3 && g.v_count < 3 {
        return Err(Error::UnsupportedGeometry(format!(
            "{}x{} views: disparity estimation needs at least 3 views along u or v",
            g.u_count, g.v_count
        )));
    }
    if !(params.inner_sigma >= 0.0 && params.outer_sigma >= 0.0 && params.epsilon > 0.0) {
        return Err(Error::InvalidParameter(
            "tensor sigmas must be non-negative and epsilon positive".into(),
        ));
    }
    let (w, h) = (g.width, g.height);
    let lab = lf.lab();
    let ppv = g.pixels_per_view();

    // Horizontal EPIs: one per row y at v = v0, rows indexed by u.
    let horizontal: Vec<Vec<(f64, f64)>> = if g.u_count >= 3 {
        (0..h)
            .into_par_iter()
            .map(|y| {
                let mut data = Vec::with_capacity(g.u_count * w);
                for u in 0..g.u_count {
                    let base = g.view_index(u, g.central_v) * ppv + y * w;
                    data.extend(lab[base..base + w].iter().map(|c| c[0] as f64));
                }
                let epi = Plane {
                    rows: g.u_count,
                    cols: w,
                    data,
                };
                epi_slopes(&epi, g.central_u, params)
            })
            .collect()
    } else {
        Vec::new()
    };

    // Vertical EPIs: one per column x at u = u0, rows indexed by v.
    let vertical: Vec<Vec<(f64, f64)>> = if g.v_count >= 3 {
        (0..w)
            .into_par_iter()
            .map(|x| {
                let mut data = Vec::with_capacity(g.v_count * h);
                for v in 0..g.v_count {
                    let base = g.view_index(g.central_u, v) * ppv;
                    data.extend((0..h).map(|y| lab[base + y * w + x][0] as f64));
                }
                let epi = Plane {
                    rows: g.v_count,
                    cols: h,
                    data,
                };
                epi_slopes(&epi, g.central_v, params)
            })
            .collect()
    } else {
        Vec::new()
    };

    let (d_min, d_max) = lf.disparity_range();
    let mut values = vec![0f32; w * h];
    let mut confidence = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let hz = horizontal.get(y).map(|r| r[x]);
            let vt = vertical.get(x).map(|c| c[y]);
            let (d, c) = match (hz, vt) {
                (Some(a), Some(b)) => {
                    if b.1 > a.1 {
                        b
                    } else {
                        a
                    }
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!("at least one axis has three views"),
            };
            let d = if d.is_finite() { d } else { 0.0 }.clamp(d_min, d_max);
            values[y * w + x] = d as f32;
            confidence[y * w + x] = c as f32;
        }
    }
    Ok(DisparityMap {
        width: w,
        height: h,
        values,
        confidence,
    })
}

/// Reads a single-channel PFM (`Pf`). Rows are stored bottom-up; a negative
/// scale marks little-endian data.
pub fn read_pfm(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::load(path, "truncated PFM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the data.
    pos += 1;
    if fields[0] != "Pf" {
        return Err(Error::load(
            path,
            format!("expected single-channel PFM magic 'Pf', found '{}'", fields[0]),
        ));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::load(path, format!("bad PFM {what} '{s}'")))
    };
    let w = parse(&fields[1], "width")?;
    let h = parse(&fields[2], "height")?;
    let scale: f64 = fields[3]
        .parse()
        .map_err(|_| Error::load(path, format!("bad PFM scale '{}'", fields[3])))?;
    let little = scale < 0.0;
    let need = w * h * 4;
    if bytes.len() < pos + need {
        return Err(Error::load(
            path,
            format!("PFM data is {} bytes, expected {need}", bytes.len().saturating_sub(pos)),
        ));
    }
    let data = &bytes[pos..pos + need];
    let mut values = vec![0f32; w * h];
    for row in 0..h {
        let y = h - 1 - row;
        for x in 0..w {
            let o = (row * w + x) * 4;
            let b = [data[o], data[o + 1], data[o + 2], data[o + 3]];
            values[y * w + x] = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
        }
    }
    Ok((w, h, values))
}

/// Writes a little-endian single-channel PFM.
pub fn write_pfm(path: &Path, width: usize, height: usize, values: &[f32]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}x{height} PFM",
            values.len()
        )));
    }
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(values.len() * 4);
    for row in 0..height {
        let y = height - 1 - row;
        for v in &values[y * width..(y + 1) * width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Loads a trusted disparity map for the central view of `geometry`.
/// Values are kept verbatim and confidence is 1 everywhere.
pub fn load_disparity(path: &Path, geometry: &Geometry) -> Result<DisparityMap> {
    let (w, h, values) = read_pfm(path)?;
    if w != geometry.width || h != geometry.height {
        return Err(Error::load(
            path,
            format!(
                "disparity is {w}x{h}, central view is {}x{}",
                geometry.width, geometry.height
            ),
        ));
    }
    DisparityMap::from_values(w, h, values).map_err(|e| Error::load(path, e.to_string()))
}

pub fn save_disparity(path: &Path, disp: &DisparityMap) -> Result<()> {
    write_pfm(path, disp.width, disp.height, &disp.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::Metadata;
    use crate::synth::{single_plane, synth_scene, Layer, Rect, SceneSpec};

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn constant_field_has_no_confidence() {
        let g = Geometry::new(5, 5, 16, 12);
        let meta = Metadata {
            name: "flat".into(),
            d_min: -1.0,
            d_max: 2.0,
        };
        let lf = LightField::from_srgb(g, meta, vec![[90, 120, 30]; g.ray_count()]).unwrap();
        let d = estimate_disparity(&lf, &TensorParams::default()).unwrap();
        assert!(d.confidence.iter().all(|&c| c < 1e-6));
        assert!(d.values.iter().all(|&v| (-1.0..=2.0).contains(&v)));
    }

    #[test]
    fn single_plane_slope_is_recovered() {
        let (lf, gt) = synth_scene(&single_plane(9, 9, 64, 64, 1.0)).unwrap();
        let d = estimate_disparity(&lf, &TensorParams::default()).unwrap();
        let errs: Vec<f64> = (0..d.values.len())
            .filter(|&i| d.confidence[i] > 0.5)
            .map(|i| (d.values[i] as f64 - gt.disparity[i] as f64).abs())
            .collect();
        assert!(errs.len() > d.values.len() / 2);
        let m = median(errs);
        assert!(m <= 0.05, "median error {m}");
    }

    #[test]
    fn two_planes_away_from_the_occlusion_band() {
        let spec = SceneSpec {
            name: "two".into(),
            layers: vec![
                Layer {
                    color: [55.0, 30.0, -20.0],
                    disparity: 1.5,
                    rect: Rect::new(20, 20, 44, 44),
                    texture: 20.0,
                },
                Layer {
                    color: [60.0, -10.0, 25.0],
                    disparity: 0.0,
                    rect: Rect::full(64, 64),
                    texture: 20.0,
                },
            ],
            u_count: 9,
            v_count: 9,
            width: 64,
            height: 64,
            noise_sigma: 0.0,
            seed: 1,
        };
        let (lf, gt) = synth_scene(&spec).unwrap();
        let d = estimate_disparity(&lf, &TensorParams::default()).unwrap();
        let near_edge = |x: usize, y: usize| {
            let inside = |x: i64, y: i64| (20..44).contains(&x) && (20..44).contains(&y);
            let here = inside(x as i64, y as i64);
            (-2..=2).any(|dy| (-2..=2).any(|dx| inside(x as i64 + dx, y as i64 + dy) != here))
        };
        for plane in [0.0f32, 1.5] {
            let errs: Vec<f64> = (0..64 * 64)
                .filter(|&i| gt.disparity[i] == plane && !near_edge(i % 64, i / 64))
                .map(|i| (d.values[i] - plane).abs() as f64)
                .collect();
            assert!(median(errs) <= 0.1, "plane {plane}");
        }
    }

    #[test]
    fn translation_moves_the_map() {
        let (lf, _) = synth_scene(&single_plane(5, 5, 48, 40, 0.7)).unwrap();
        let p = TensorParams::default();
        let a = estimate_disparity(&lf, &p).unwrap();
        let b = estimate_disparity(&lf.translated(3, 2), &p).unwrap();
        // The tensor support is 3 + 6 + 1 pixels; stay clear of the border.
        let m = 12;
        for y in m..40 - m {
            for x in m..48 - m {
                let (va, vb) = (a.at(x, y), b.at(x + 3, y + 2));
                assert!((va - vb).abs() < 1e-5, "({x},{y}) {va} vs {vb}");
            }
        }
    }

    #[test]
    fn more_views_do_not_hurt() {
        let mut prev = f64::INFINITY;
        for n in [3, 5, 9] {
            let (lf, gt) = synth_scene(&single_plane(n, n, 48, 48, 0.6)).unwrap();
            let d = estimate_disparity(&lf, &TensorParams::default()).unwrap();
            let mean: f64 = d
                .values
                .iter()
                .zip(&gt.disparity)
                .map(|(a, b)| (a - b).abs() as f64)
                .sum::<f64>()
                / d.values.len() as f64;
            assert!(mean <= prev + 1e-9, "U={n}: {mean} > {prev}");
            prev = mean;
        }
    }

    #[test]
    fn needs_three_views_on_some_axis() {
        let g = Geometry::new(2, 2, 8, 8);
        let meta = Metadata {
            name: "small".into(),
            d_min: 0.0,
            d_max: 1.0,
        };
        let lf = LightField::from_srgb(g, meta, vec![[0, 0, 0]; g.ray_count()]).unwrap();
        assert!(matches!(
            estimate_disparity(&lf, &TensorParams::default()),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn pfm_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let values: Vec<f32> = (0..35).map(|i| (i as f32 * 0.37).sin() * 3.0).collect();
        write_pfm(&path, 7, 5, &values).unwrap();
        let g = Geometry::new(1, 1, 7, 5);
        let d = load_disparity(&path, &g).unwrap();
        assert_eq!(
            d.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(d.confidence.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn zero_pfm_loads_as_zero_map() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pfm");
        write_pfm(&path, 4, 3, &[0.0; 12]).unwrap();
        let d = load_disparity(&path, &Geometry::new(3, 3, 4, 3)).unwrap();
        assert_eq!(d, DisparityMap::constant(4, 3, 0.0));
    }

    #[test]
    fn nan_is_reported_with_its_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.pfm");
        let mut v = vec![0.0f32; 12];
        v[6] = f32::NAN;
        write_pfm(&path, 4, 3, &v).unwrap();
        let err = load_disparity(&path, &Geometry::new(1, 1, 4, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 1)") && msg.contains("index 6"), "{msg}");
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.pfm");
        write_pfm(&path, 4, 3, &[0.0; 12]).unwrap();
        assert!(load_disparity(&path, &Geometry::new(1, 1, 3, 4)).is_err());
    }
}
