//! On-disk formats.
//!
//! A light-field directory holds `lf.json` and one `view_{u}_{v}.png` per
//! view (8-bit sRGB). Alongside it may sit ground truth
//! (`gt_label_{u}_{v}.png`, `gt_disparity.pfm`), superpixels
//! (`lfsp_{u}_{v}.png`, 16-bit, plus `lfsp.json`) and results
//! (`label_{u}_{v}.png`, `labels.json`, `trace.json`).

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::disparity::{load_disparity, save_disparity, DisparityMap};
use crate::error::{Error, Result};
use crate::lfsp::{LfspParams, LfspSegmentation, ScribbleMap, Strokes};
use crate::lightfield::{Geometry, GroundTruth, LightField, Metadata, ViewLabels};
use crate::pipeline::DisparitySource;

/// Contents of `lf.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfManifest {
    #[serde(default)]
    pub name: String,
    pub u_count: usize,
    pub v_count: usize,
    pub width: usize,
    pub height: usize,
    pub central_u: usize,
    pub central_v: usize,
    pub d_min: f64,
    pub d_max: f64,
}

impl LfManifest {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            u_count: self.u_count,
            v_count: self.v_count,
            width: self.width,
            height: self.height,
            central_u: self.central_u,
            central_v: self.central_v,
        }
    }
}

pub const GT_DISPARITY: &str = "gt_disparity.pfm";

pub fn view_file(prefix: &str, u: usize, v: usize) -> String {
    format!("{prefix}_{u}_{v}.png")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::load(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::load(path, "file not found"));
    }
    image::open(path).map_err(|e| Error::load(path, e.to_string()))
}

fn check_size(path: &Path, img: &DynamicImage, w: usize, h: usize) -> Result<()> {
    if img.width() as usize != w || img.height() as usize != h {
        return Err(Error::load(
            path,
            format!("image is {}x{}, expected {w}x{h}", img.width(), img.height()),
        ));
    }
    Ok(())
}

/// PNG bytes of an RGB image.
pub fn encode_png_rgb(width: usize, height: usize, pixels: &[[u8; 3]]) -> Vec<u8> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, pixels.iter().flatten().copied().collect())
            .expect("pixel count matches");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

/// PNG bytes of an 8-bit single-channel image.
pub fn encode_png_gray(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, pixels.to_vec()).expect("pixel count matches");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn save_png_rgb(path: &Path, width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<()> {
    fs::write(path, encode_png_rgb(width, height, pixels)).map_err(|e| Error::io(path, e))
}

pub fn save_png_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    fs::write(path, encode_png_gray(width, height, pixels)).map_err(|e| Error::io(path, e))
}

fn read_gray8(path: &Path, w: usize, h: usize) -> Result<Vec<u8>> {
    let img = open_image(path)?;
    check_size(path, &img, w, h)?;
    match img {
        DynamicImage::ImageLuma8(b) => Ok(b.into_raw()),
        _ => Err(Error::load(path, "expected an 8-bit single-channel PNG")),
    }
}

/// Loads `lf.json` and every view image of a light-field directory.
pub fn load_lightfield(dir: &Path) -> Result<LightField> {
    let manifest: LfManifest = read_json(&dir.join("lf.json"))?;
    let g = manifest.geometry();
    g.validate().map_err(|e| Error::load(dir.join("lf.json"), e.to_string()))?;
    let mut srgb = Vec::with_capacity(g.ray_count());
    for v in 0..g.v_count {
        for u in 0..g.u_count {
            let path = dir.join(view_file("view", u, v));
            let img = open_image(&path)?;
            check_size(&path, &img, g.width, g.height)?;
            let rgb = img.to_rgb8();
            srgb.extend(rgb.pixels().map(|p| p.0));
        }
    }
    let name = if manifest.name.is_empty() {
        dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        manifest.name.clone()
    };
    let meta = Metadata {
        name,
        d_min: manifest.d_min,
        d_max: manifest.d_max,
    };
    LightField::from_srgb(g, meta, srgb).map_err(|e| Error::load(dir.join("lf.json"), e.to_string()))
}

pub fn save_lightfield(dir: &Path, lf: &LightField) -> Result<()> {
    create_dir(dir)?;
    let g = lf.geometry();
    let m = lf.metadata();
    let manifest = LfManifest {
        name: m.name.clone(),
        u_count: g.u_count,
        v_count: g.v_count,
        width: g.width,
        height: g.height,
        central_u: g.central_u,
        central_v: g.central_v,
        d_min: m.d_min,
        d_max: m.d_max,
    };
    write_json(&dir.join("lf.json"), &manifest)?;
    for v in 0..g.v_count {
        for u in 0..g.u_count {
            save_png_rgb(&dir.join(view_file("view", u, v)), g.width, g.height, lf.view_srgb(u, v))?;
        }
    }
    Ok(())
}

/// Writes `{prefix}_{u}_{v}.png` label maps.
pub fn save_view_labels(dir: &Path, prefix: &str, labels: &ViewLabels) -> Result<()> {
    create_dir(dir)?;
    let g = labels.geometry;
    for v in 0..g.v_count {
        for u in 0..g.u_count {
            save_png_gray(&dir.join(view_file(prefix, u, v)), g.width, g.height, labels.view(u, v))?;
        }
    }
    Ok(())
}

pub fn load_view_labels(dir: &Path, prefix: &str, geometry: &Geometry) -> Result<ViewLabels> {
    let g = geometry;
    let mut labels = Vec::with_capacity(g.ray_count());
    for v in 0..g.v_count {
        for u in 0..g.u_count {
            labels.extend(read_gray8(&dir.join(view_file(prefix, u, v)), g.width, g.height)?);
        }
    }
    ViewLabels::new(*g, labels)
}

pub fn save_ground_truth(dir: &Path, gt: &GroundTruth) -> Result<()> {
    save_view_labels(dir, "gt_label", &gt.labels)?;
    let g = gt.labels.geometry;
    let disp = DisparityMap::from_values(g.width, g.height, gt.disparity.clone())?;
    save_disparity(&dir.join(GT_DISPARITY), &disp)
}

/// Ground-truth labels, plus the disparity map when `gt_disparity.pfm`
/// exists (otherwise empty).
pub fn load_ground_truth(dir: &Path, geometry: &Geometry) -> Result<GroundTruth> {
    let labels = load_view_labels(dir, "gt_label", geometry)?;
    let pfm = dir.join(GT_DISPARITY);
    let disparity = if pfm.exists() {
        load_disparity(&pfm, geometry)?.values
    } else {
        Vec::new()
    };
    let num_labels = labels.max_label();
    Ok(GroundTruth {
        labels,
        disparity,
        num_labels,
    })
}

/// Resolves a disparity choice: `estimate`, `gt` (the light field's
/// `gt_disparity.pfm`) or a path to a PFM file.
pub fn disparity_source(choice: &str, lf_dir: &Path, geometry: &Geometry) -> Result<DisparitySource> {
    match choice {
        "estimate" => Ok(DisparitySource::Estimate),
        "gt" => Ok(DisparitySource::Given(load_disparity(&lf_dir.join(GT_DISPARITY), geometry)?)),
        path => Ok(DisparitySource::Given(load_disparity(Path::new(path), geometry)?)),
    }
}

/// Contents of `lfsp.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfspManifest {
    pub count: usize,
    pub size: usize,
    pub params: LfspParams,
}

pub fn save_segmentation(dir: &Path, seg: &LfspSegmentation, params: &LfspParams) -> Result<()> {
    create_dir(dir)?;
    let g = seg.geometry();
    if seg.count() > u16::MAX as usize + 1 {
        return Err(Error::OutOfRange(format!(
            "{} superpixels do not fit a 16-bit map",
            seg.count()
        )));
    }
    for view in 0..g.view_count() {
        let (u, v) = g.view_coords(view);
        let ids: Vec<u16> = seg.view(view).iter().map(|&id| id as u16).collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(g.width as u32, g.height as u32, ids).expect("pixel count matches");
        let path = dir.join(view_file("lfsp", u, v));
        buf.save_with_format(&path, ImageFormat::Png)
            .map_err(|e| Error::load(&path, e.to_string()))?;
    }
    write_json(
        &dir.join("lfsp.json"),
        &LfspManifest {
            count: seg.count(),
            size: seg.size(),
            params: *params,
        },
    )
}

pub fn load_segmentation(dir: &Path, geometry: &Geometry) -> Result<LfspSegmentation> {
    let manifest: LfspManifest = read_json(&dir.join("lfsp.json"))?;
    let g = geometry;
    let mut assignment = Vec::with_capacity(g.ray_count());
    for v in 0..g.v_count {
        for u in 0..g.u_count {
            let path = dir.join(view_file("lfsp", u, v));
            let img = open_image(&path)?;
            check_size(&path, &img, g.width, g.height)?;
            match img {
                DynamicImage::ImageLuma16(b) => assignment.extend(b.pixels().map(|p| p.0[0] as u32)),
                _ => return Err(Error::load(&path, "expected a 16-bit single-channel PNG")),
            }
        }
    }
    let seg = LfspSegmentation::from_assignment(*g, assignment, manifest.size)?;
    if seg.count() != manifest.count {
        return Err(Error::load(
            dir.join("lfsp.json"),
            format!("manifest lists {} superpixels, maps hold {}", manifest.count, seg.count()),
        ));
    }
    Ok(seg)
}

/// Reads scribbles from `scribbles.png` (8-bit label map) or
/// `scribbles.json` (stroke list). A directory is searched for either.
pub fn load_scribbles(path: &Path) -> Result<ScribbleMap> {
    let path: PathBuf = if path.is_dir() {
        let png = path.join("scribbles.png");
        if png.exists() {
            png
        } else {
            path.join("scribbles.json")
        }
    } else {
        path.to_path_buf()
    };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let strokes: Strokes = read_json(&path)?;
        strokes.rasterize().map_err(|e| Error::load(&path, e.to_string()))
    } else {
        let img = open_image(&path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let labels = read_gray8(&path, w, h)?;
        ScribbleMap::new(w, h, labels).map_err(|e| Error::load(&path, e.to_string()))
    }
}

pub fn save_scribbles_png(path: &Path, map: &ScribbleMap) -> Result<()> {
    save_png_gray(path, map.width, map.height, &map.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfsp::Stroke;
    use crate::synth::{synth_scene, three_planes};

    #[test]
    fn lightfield_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (lf, gt) = synth_scene(&three_planes(3, 3, 24, 20)).unwrap();
        save_lightfield(dir.path(), &lf).unwrap();
        save_ground_truth(dir.path(), &gt).unwrap();
        let back = load_lightfield(dir.path()).unwrap();
        assert_eq!(back.srgb(), lf.srgb());
        assert_eq!(back.geometry(), lf.geometry());
        let gt2 = load_ground_truth(dir.path(), lf.geometry()).unwrap();
        assert_eq!(gt2.labels, gt.labels);
        assert_eq!(gt2.disparity, gt.disparity);
        assert_eq!(gt2.num_labels, gt.num_labels);
    }

    #[test]
    fn single_view_directory_loads() {
        let dir = tempfile::tempdir().unwrap();
        let (lf, _) = synth_scene(&three_planes(1, 1, 16, 16)).unwrap();
        save_lightfield(dir.path(), &lf).unwrap();
        let back = load_lightfield(dir.path()).unwrap();
        assert_eq!(back.geometry().view_count(), 1);
    }

    #[test]
    fn missing_view_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let (lf, _) = synth_scene(&three_planes(5, 5, 32, 32)).unwrap();
        save_lightfield(dir.path(), &lf).unwrap();
        fs::remove_file(dir.path().join("view_3_4.png")).unwrap();
        let msg = load_lightfield(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("view_3_4"), "{msg}");
    }

    #[test]
    fn inconsistent_view_size_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let (lf, _) = synth_scene(&three_planes(3, 3, 16, 16)).unwrap();
        save_lightfield(dir.path(), &lf).unwrap();
        save_png_rgb(&dir.path().join("view_1_2.png"), 4, 4, &[[0, 0, 0]; 16]).unwrap();
        let msg = load_lightfield(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("view_1_2") && msg.contains("4x4"), "{msg}");
    }

    #[test]
    fn malformed_manifest_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("lf.json"), "{\"u_count\": 3}").unwrap();
        let msg = load_lightfield(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("lf.json"), "{msg}");
    }

    #[test]
    fn segmentation_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::new(2, 1, 3, 2);
        let seg = LfspSegmentation::from_assignment(g, vec![0, 1, 1, 2, 2, 300, 0, 0, 1, 2, 300, 300], 4).unwrap();
        save_segmentation(dir.path(), &seg, &LfspParams::default()).unwrap();
        assert_eq!(load_segmentation(dir.path(), &g).unwrap(), seg);
    }

    #[test]
    fn scribbles_from_png_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let strokes = Strokes {
            width: 12,
            height: 8,
            strokes: vec![
                Stroke {
                    label: 1,
                    radius: 1.0,
                    points: vec![[1.0, 1.0], [5.0, 2.0]],
                },
                Stroke {
                    label: 2,
                    radius: 1.5,
                    points: vec![[9.0, 6.0]],
                },
            ],
        };
        write_json(&dir.path().join("scribbles.json"), &strokes).unwrap();
        let from_json = load_scribbles(&dir.path().join("scribbles.json")).unwrap();
        save_scribbles_png(&dir.path().join("s.png"), &from_json).unwrap();
        assert_eq!(load_scribbles(&dir.path().join("s.png")).unwrap(), from_json);
        assert_eq!(load_scribbles(dir.path()).unwrap(), from_json);
    }
}
