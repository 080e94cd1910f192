//! Light-field data model.
//!
//! A light field is a fully populated `U x V` grid of views, each an
//! `X x Y` image. Rays are addressed as `(u, v, x, y)`: `u, v` index the view
//! plane and `x, y` the image plane. Pixels of all views live in one flat
//! buffer, view-major with `view = v * U + u` and `pixel = y * X + x`.

use serde::{Deserialize, Serialize};

use crate::color::rgb_to_lab;
use crate::error::{Error, Result};
use crate::render::label_color;

/// Rounds half-way values up. Every sheared coordinate in the crate goes
/// through this so that forward projection and inverse rendering agree.
#[inline]
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Shape of a light field and its central view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub u_count: usize,
    pub v_count: usize,
    pub width: usize,
    pub height: usize,
    pub central_u: usize,
    pub central_v: usize,
}

impl Geometry {
    /// Geometry with the central view at the grid center.
    pub fn new(u_count: usize, v_count: usize, width: usize, height: usize) -> Self {
        Self {
            u_count,
            v_count,
            width,
            height,
            central_u: u_count / 2,
            central_v: v_count / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_count == 0 || self.v_count == 0 {
            return Err(Error::InvalidInput("view grid must be at least 1x1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("views must be at least 1x1 pixels".into()));
        }
        if self.central_u >= self.u_count || self.central_v >= self.v_count {
            return Err(Error::OutOfRange(format!(
                "central view ({}, {}) outside {}x{} grid",
                self.central_u, self.central_v, self.u_count, self.v_count
            )));
        }
        Ok(())
    }

    pub fn view_count(&self) -> usize {
        self.u_count * self.v_count
    }

    pub fn pixels_per_view(&self) -> usize {
        self.width * self.height
    }

    pub fn ray_count(&self) -> usize {
        self.view_count() * self.pixels_per_view()
    }

    #[inline]
    pub fn view_index(&self, u: usize, v: usize) -> usize {
        v * self.u_count + u
    }

    #[inline]
    pub fn view_coords(&self, view: usize) -> (usize, usize) {
        (view % self.u_count, view / self.u_count)
    }

    pub fn central_view(&self) -> usize {
        self.view_index(self.central_u, self.central_v)
    }

    /// Signed view offset from the central view.
    #[inline]
    pub fn view_offset(&self, view: usize) -> (f64, f64) {
        let (u, v) = self.view_coords(view);
        (
            u as f64 - self.central_u as f64,
            v as f64 - self.central_v as f64,
        )
    }

    #[inline]
    pub fn ray_index(&self, ray: Ray) -> usize {
        self.view_index(ray.u, ray.v) * self.pixels_per_view() + ray.y * self.width + ray.x
    }

    pub fn contains(&self, ray: Ray) -> bool {
        ray.u < self.u_count && ray.v < self.v_count && ray.x < self.width && ray.y < self.height
    }

    /// Projects central-view pixel `(x, y)` with disparity `d` into the view
    /// at offset `(du, dv)`; `None` when it leaves the frame.
    #[inline]
    pub fn shear(&self, x: usize, y: usize, d: f64, du: f64, dv: f64) -> Option<(usize, usize)> {
        let sx = round_half_up(x as f64 + d * du);
        let sy = round_half_up(y as f64 + d * dv);
        if sx < 0 || sy < 0 || sx >= self.width as i64 || sy >= self.height as i64 {
            None
        } else {
            Some((sx as usize, sy as usize))
        }
    }
}

/// A single ray `(u, v, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ray {
    pub u: usize,
    pub v: usize,
    pub x: usize,
    pub y: usize,
}

impl Ray {
    pub fn new(u: usize, v: usize, x: usize, y: usize) -> Self {
        Self { u, v, x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub d_min: f64,
    pub d_max: f64,
}

/// The 4D ray function stored as sRGB bytes and CIELab floats.
#[derive(Debug, Clone)]
pub struct LightField {
    geometry: Geometry,
    metadata: Metadata,
    srgb: Vec<[u8; 3]>,
    lab: Vec<[f32; 3]>,
}

impl LightField {
    /// Builds a light field from view-major sRGB pixels and converts them to
    /// CIELab once.
    pub fn from_srgb(geometry: Geometry, metadata: Metadata, srgb: Vec<[u8; 3]>) -> Result<Self> {
        geometry.validate()?;
        if srgb.len() != geometry.ray_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                geometry.ray_count(),
                srgb.len()
            )));
        }
        if !(metadata.d_min <= metadata.d_max) {
            return Err(Error::InvalidInput(format!(
                "disparity range [{}, {}] is empty",
                metadata.d_min, metadata.d_max
            )));
        }
        let lab = srgb_to_lab_plane(&srgb);
        Ok(Self {
            geometry,
            metadata,
            srgb,
            lab,
        })
    }

    /// Builds a light field directly from CIELab samples; the sRGB plane is
    /// derived for display.
    pub fn from_lab(geometry: Geometry, metadata: Metadata, lab: Vec<[f32; 3]>) -> Result<Self> {
        geometry.validate()?;
        if lab.len() != geometry.ray_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                geometry.ray_count(),
                lab.len()
            )));
        }
        if lab.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite CIELab sample".into()));
        }
        let srgb = lab
            .iter()
            .map(|c| crate::color::lab_to_rgb([c[0] as f64, c[1] as f64, c[2] as f64]))
            .collect();
        Ok(Self {
            geometry,
            metadata,
            srgb,
            lab,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn disparity_range(&self) -> (f64, f64) {
        (self.metadata.d_min, self.metadata.d_max)
    }

    pub fn srgb(&self) -> &[[u8; 3]] {
        &self.srgb
    }

    pub fn lab(&self) -> &[[f32; 3]] {
        &self.lab
    }

    pub fn view_srgb(&self, u: usize, v: usize) -> &[[u8; 3]] {
        let n = self.geometry.pixels_per_view();
        let start = self.geometry.view_index(u, v) * n;
        &self.srgb[start..start + n]
    }

    pub fn view_lab(&self, u: usize, v: usize) -> &[[f32; 3]] {
        let n = self.geometry.pixels_per_view();
        let start = self.geometry.view_index(u, v) * n;
        &self.lab[start..start + n]
    }

    pub fn central_srgb(&self) -> &[[u8; 3]] {
        self.view_srgb(self.geometry.central_u, self.geometry.central_v)
    }

    pub fn central_lab(&self) -> &[[f32; 3]] {
        self.view_lab(self.geometry.central_u, self.geometry.central_v)
    }

    pub fn lab_at(&self, ray: Ray) -> [f32; 3] {
        self.lab[self.geometry.ray_index(ray)]
    }

    /// The same light field with every view translated by `(dx, dy)`;
    /// pixels shifted in from outside replicate the nearest border pixel.
    pub fn translated(&self, dx: i64, dy: i64) -> LightField {
        let g = self.geometry;
        let mut srgb = Vec::with_capacity(self.srgb.len());
        for view in 0..g.view_count() {
            let base = view * g.pixels_per_view();
            for y in 0..g.height {
                let sy = (y as i64 - dy).clamp(0, g.height as i64 - 1) as usize;
                for x in 0..g.width {
                    let sx = (x as i64 - dx).clamp(0, g.width as i64 - 1) as usize;
                    srgb.push(self.srgb[base + sy * g.width + sx]);
                }
            }
        }
        LightField::from_srgb(g, self.metadata.clone(), srgb).expect("same geometry")
    }
}

fn srgb_to_lab_plane(srgb: &[[u8; 3]]) -> Vec<[f32; 3]> {
    use rayon::prelude::*;
    use std::collections::HashMap;
    const CHUNK: usize = 1 << 16;
    srgb.par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            // Scenes repeat colors heavily; memoizing skips most cube roots.
            let mut cache: HashMap<[u8; 3], [f32; 3]> = HashMap::new();
            chunk
                .iter()
                .map(|&p| {
                    *cache.entry(p).or_insert_with(|| {
                        let l = rgb_to_lab(p);
                        [l[0] as f32, l[1] as f32, l[2] as f32]
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Per-view label maps (`0` = none), e.g. ground truth or an expanded
/// labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewLabels {
    pub geometry: Geometry,
    pub labels: Vec<u8>,
}

impl ViewLabels {
    pub fn new(geometry: Geometry, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != geometry.ray_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} labels, got {}",
                geometry.ray_count(),
                labels.len()
            )));
        }
        Ok(Self { geometry, labels })
    }

    pub fn view(&self, u: usize, v: usize) -> &[u8] {
        let n = self.geometry.pixels_per_view();
        let start = self.geometry.view_index(u, v) * n;
        &self.labels[start..start + n]
    }

    pub fn view_by_index(&self, view: usize) -> &[u8] {
        let n = self.geometry.pixels_per_view();
        &self.labels[view * n..(view + 1) * n]
    }

    pub fn central(&self) -> &[u8] {
        self.view(self.geometry.central_u, self.geometry.central_v)
    }

    pub fn at(&self, ray: Ray) -> u8 {
        self.labels[self.geometry.ray_index(ray)]
    }

    pub fn max_label(&self) -> u8 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

/// Ground truth that accompanies synthetic scenes and benchmark data.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub labels: ViewLabels,
    /// Central-view disparity, row-major.
    pub disparity: Vec<f32>,
    pub num_labels: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Fixes `(v, y)`; rows are `u`, columns are `x`.
    Horizontal,
    /// Fixes `(u, x)`; rows are `v`, columns are `y`.
    Vertical,
}

/// What to draw into an EPI.
#[derive(Debug, Clone, Copy)]
pub enum EpiSource<'a> {
    Color,
    Labels(&'a ViewLabels),
}

/// An epipolar-plane image.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiImage<P = [u8; 3]> {
    pub orientation: Orientation,
    /// `(v, y)` for horizontal EPIs, `(u, x)` for vertical ones.
    pub fixed: (usize, usize),
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<P>,
}

impl<P: Copy> EpiImage<P> {
    pub fn get(&self, col: usize, row: usize) -> P {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[P] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }
}

fn epi_rays(
    geometry: &Geometry,
    orientation: Orientation,
    fixed: (usize, usize),
) -> Result<(usize, usize, Vec<Ray>)> {
    let g = geometry;
    match orientation {
        Orientation::Horizontal => {
            let (v, y) = fixed;
            if v >= g.v_count || y >= g.height {
                return Err(Error::OutOfRange(format!(
                    "horizontal EPI at (v={v}, y={y}) outside {}x{} views of height {}",
                    g.u_count, g.v_count, g.height
                )));
            }
            let rays = (0..g.u_count)
                .flat_map(|u| (0..g.width).map(move |x| Ray::new(u, v, x, y)))
                .collect();
            Ok((g.width, g.u_count, rays))
        }
        Orientation::Vertical => {
            let (u, x) = fixed;
            if u >= g.u_count || x >= g.width {
                return Err(Error::OutOfRange(format!(
                    "vertical EPI at (u={u}, x={x}) outside {}x{} views of width {}",
                    g.u_count, g.v_count, g.width
                )));
            }
            let rays = (0..g.v_count)
                .flat_map(|v| (0..g.height).map(move |y| Ray::new(u, v, x, y)))
                .collect();
            Ok((g.height, g.v_count, rays))
        }
    }
}

/// Extracts an EPI of the light field colors or of a label field drawn with
/// the label palette.
pub fn extract_epi(
    lf: &LightField,
    orientation: Orientation,
    fixed: (usize, usize),
    source: EpiSource<'_>,
) -> Result<EpiImage> {
    let g = lf.geometry();
    let (width, height, rays) = epi_rays(g, orientation, fixed)?;
    let pixels = match source {
        EpiSource::Color => rays.iter().map(|&r| lf.srgb[g.ray_index(r)]).collect(),
        EpiSource::Labels(labels) => {
            if labels.geometry != *g {
                return Err(Error::DimensionMismatch(
                    "label field does not match the light field".into(),
                ));
            }
            rays.iter().map(|&r| label_color(labels.at(r))).collect()
        }
    };
    Ok(EpiImage {
        orientation,
        fixed,
        width,
        height,
        pixels,
    })
}

/// Extracts an EPI of raw label ids.
pub fn extract_label_epi(
    labels: &ViewLabels,
    orientation: Orientation,
    fixed: (usize, usize),
) -> Result<EpiImage<u8>> {
    let (width, height, rays) = epi_rays(&labels.geometry, orientation, fixed)?;
    Ok(EpiImage {
        orientation,
        fixed,
        width,
        height,
        pixels: rays.iter().map(|&r| labels.at(r)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_lf(g: Geometry, rgb: [u8; 3]) -> LightField {
        let meta = Metadata {
            name: "const".into(),
            d_min: -1.0,
            d_max: 1.0,
        };
        LightField::from_srgb(g, meta, vec![rgb; g.ray_count()]).unwrap()
    }

    #[test]
    fn round_half_up_shifts_rows_rigidly() {
        for x in 0..20i64 {
            for k in -40..=40 {
                let s = k as f64 * 0.25;
                let fwd = round_half_up(x as f64 + s);
                assert_eq!(round_half_up(x as f64 + 1.0 + s), fwd + 1);
                assert!((fwd as f64 - (x as f64 + s)).abs() <= 0.5);
            }
        }
        assert_eq!(round_half_up(0.5), 1);
        assert_eq!(round_half_up(-0.5), 0);
    }

    #[test]
    fn single_view_epi_is_one_scanline() {
        let g = Geometry::new(1, 1, 6, 4);
        let mut srgb = vec![[0u8; 3]; g.ray_count()];
        for x in 0..6 {
            srgb[2 * 6 + x] = [x as u8 * 10, 0, 0];
        }
        let lf = LightField::from_srgb(
            g,
            Metadata {
                name: "s".into(),
                d_min: 0.0,
                d_max: 0.0,
            },
            srgb,
        )
        .unwrap();
        let epi = extract_epi(&lf, Orientation::Horizontal, (0, 2), EpiSource::Color).unwrap();
        assert_eq!((epi.width, epi.height), (6, 1));
        assert_eq!(epi.row(0), &lf.view_srgb(0, 0)[12..18]);
    }

    #[test]
    fn constant_light_field_gives_constant_epi() {
        let g = Geometry::new(5, 3, 8, 7);
        let lf = constant_lf(g, [12, 34, 56]);
        let h = extract_epi(&lf, Orientation::Horizontal, (1, 3), EpiSource::Color).unwrap();
        assert_eq!((h.width, h.height), (8, 5));
        assert!(h.pixels.iter().all(|&p| p == [12, 34, 56]));
        let v = extract_epi(&lf, Orientation::Vertical, (4, 7), EpiSource::Color).unwrap();
        assert_eq!((v.width, v.height), (7, 3));
        assert!(v.pixels.iter().all(|&p| p == [12, 34, 56]));
    }

    #[test]
    fn epi_out_of_range_is_rejected() {
        let g = Geometry::new(3, 3, 4, 4);
        let lf = constant_lf(g, [0, 0, 0]);
        assert!(extract_epi(&lf, Orientation::Horizontal, (3, 0), EpiSource::Color).is_err());
        assert!(extract_epi(&lf, Orientation::Horizontal, (0, 4), EpiSource::Color).is_err());
        assert!(extract_epi(&lf, Orientation::Vertical, (0, 4), EpiSource::Color).is_err());
    }

    #[test]
    fn geometry_rejects_bad_central_view() {
        let mut g = Geometry::new(3, 3, 4, 4);
        g.central_u = 3;
        assert!(g.validate().is_err());
    }

    #[test]
    fn translated_moves_pixels() {
        let g = Geometry::new(1, 1, 4, 3);
        let srgb = (0..12).map(|i| [i as u8, 0, 0]).collect();
        let meta = Metadata {
            name: "t".into(),
            d_min: 0.0,
            d_max: 0.0,
        };
        let lf = LightField::from_srgb(g, meta, srgb).unwrap();
        let t = lf.translated(1, 1);
        assert_eq!(t.srgb()[1 * 4 + 1], [0, 0, 0]);
        assert_eq!(t.srgb()[2 * 4 + 3], [6, 0, 0]);
    }
}
