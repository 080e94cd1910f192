//! Label palette, overlay compositing and EPI strips.

use crate::error::Result;
use crate::lightfield::{extract_epi, EpiSource, LightField, Orientation, ViewLabels};

const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [255, 225, 25],
    [145, 30, 180],
    [70, 240, 240],
    [245, 130, 48],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 190],
    [0, 128, 128],
    [170, 110, 40],
];

/// Display color of a label; `0` (none) is black.
pub fn label_color(label: u8) -> [u8; 3] {
    if label == 0 {
        [0, 0, 0]
    } else {
        PALETTE[(label as usize - 1) % PALETTE.len()]
    }
}

/// Composites translucent label fills and opaque label boundaries over an
/// image. `alpha` is the fill opacity in `[0, 1]`.
pub fn overlay(
    image: &[[u8; 3]],
    labels: &[u8],
    width: usize,
    height: usize,
    alpha: f64,
) -> Vec<[u8; 3]> {
    assert_eq!(image.len(), width * height);
    assert_eq!(labels.len(), width * height);
    let mut out = Vec::with_capacity(image.len());
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let l = labels[i];
            let boundary = (x + 1 < width && labels[i + 1] != l)
                || (y + 1 < height && labels[i + width] != l)
                || (x > 0 && labels[i - 1] != l)
                || (y > 0 && labels[i - width] != l);
            let c = label_color(l);
            let p = image[i];
            out.push(if boundary {
                [255, 255, 255]
            } else if l == 0 {
                p
            } else {
                let mix = |a: u8, b: u8| ((1.0 - alpha) * a as f64 + alpha * b as f64).round() as u8;
                [mix(p[0], c[0]), mix(p[1], c[1]), mix(p[2], c[2])]
            });
        }
    }
    out
}

/// Marks pixels on a label-map boundary (4-neighborhood).
pub fn boundary_mask(labels: &[u32], width: usize, height: usize) -> Vec<bool> {
    let mut mask = vec![false; labels.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if (x + 1 < width && labels[i + 1] != labels[i])
                || (y + 1 < height && labels[i + width] != labels[i])
            {
                mask[i] = true;
                if x + 1 < width && labels[i + 1] != labels[i] {
                    mask[i + 1] = true;
                }
                if y + 1 < height && labels[i + width] != labels[i] {
                    mask[i + width] = true;
                }
            }
        }
    }
    mask
}

/// An RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

/// The color EPI through `fixed`, with the matching label EPI stacked below
/// it when labels are given. Each EPI row is repeated `scale` times and the
/// two halves are separated by a white line.
pub fn epi_strip(
    lf: &LightField,
    labels: Option<&ViewLabels>,
    orientation: Orientation,
    fixed: (usize, usize),
    scale: usize,
) -> Result<Raster> {
    let scale = scale.max(1);
    let mut parts = vec![extract_epi(lf, orientation, fixed, EpiSource::Color)?];
    if let Some(l) = labels {
        parts.push(extract_epi(lf, orientation, fixed, EpiSource::Labels(l))?);
    }
    let width = parts[0].width;
    let mut pixels = Vec::new();
    for (k, epi) in parts.iter().enumerate() {
        if k > 0 {
            pixels.extend(std::iter::repeat_n([255, 255, 255], width));
        }
        for row in 0..epi.height {
            for _ in 0..scale {
                pixels.extend_from_slice(epi.row(row));
            }
        }
    }
    Ok(Raster {
        width,
        height: pixels.len() / width,
        pixels,
    })
}
