//! Fixed-size training patches cut from a frame and its coordinate map.
//!
//! The frame is first resized to 108×192 (rows × columns); the image is
//! resampled with a triangle (bilinear) filter, the map by nearest neighbor
//! so no (μ, ν) values are invented. A 64×64 window centered on the bounding
//! box center is then cut out, shifted inward where it would leave the frame.

use super::DatagenError;
use crate::raster::CoordinateMap;
use image::imageops::{self, FilterType};
use image::RgbImage;
use serde::{Deserialize, Serialize};

pub const RESIZED_WIDTH: u32 = 192;
pub const RESIZED_HEIGHT: u32 = 108;
pub const CROP_SIZE: u32 = 64;

/// Axis-aligned box in source-frame pixels, `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Tight box around the valid pixels of a map.
    pub fn of_valid(map: &CoordinateMap) -> Option<Self> {
        let mut b: Option<Self> = None;
        for (x, y, _) in map.valid_pixels() {
            let (x, y) = (x as f64, y as f64);
            let bb = b.get_or_insert(Self {
                x0: x,
                y0: y,
                x1: x + 1.0,
                y1: y + 1.0,
            });
            bb.x0 = bb.x0.min(x);
            bb.y0 = bb.y0.min(y);
            bb.x1 = bb.x1.max(x + 1.0);
            bb.y1 = bb.y1.max(y + 1.0);
        }
        b
    }
}

/// Where a patch came from, enough to map patch pixels back to the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchProvenance {
    pub source_width: u32,
    pub source_height: u32,
    /// Source pixels per resized pixel, horizontally and vertically.
    pub scale_x: f64,
    pub scale_y: f64,
    /// Top-left corner of the crop in the resized frame.
    pub crop_row: u32,
    pub crop_col: u32,
}

impl PatchProvenance {
    /// Source-frame position of the center of patch pixel `(col, row)`.
    pub fn to_source(&self, col: u32, row: u32) -> (f64, f64) {
        (
            (self.crop_col as f64 + col as f64 + 0.5) * self.scale_x,
            (self.crop_row as f64 + row as f64 + 0.5) * self.scale_y,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: RgbImage,
    pub map: CoordinateMap,
    pub provenance: PatchProvenance,
}

fn nearest_source(i: u32, from: u32, to: u32) -> u32 {
    let s = ((i as f64 + 0.5) * from as f64 / to as f64).floor() as u32;
    s.min(from - 1)
}

fn resize_map(map: &CoordinateMap, w: u32, h: u32) -> CoordinateMap {
    let mut out = CoordinateMap::empty(w, h);
    for r in 0..h {
        let sr = nearest_source(r, map.height(), h);
        for c in 0..w {
            let sc = nearest_source(c, map.width(), w);
            if let Some(uv) = map.get(sc, sr) {
                out.set(c, r, uv);
            }
        }
    }
    out
}

fn crop_start(center: f64, size: u32) -> u32 {
    let start = (center - CROP_SIZE as f64 / 2.0).round();
    start.clamp(0.0, (size - CROP_SIZE) as f64) as u32
}

pub fn make_patch(
    frame: &RgbImage,
    map: &CoordinateMap,
    bbox: &BoundingBox,
) -> Result<Patch, DatagenError> {
    let (w, h) = frame.dimensions();
    if (w, h) != (map.width(), map.height()) {
        return Err(DatagenError::SizeMismatch(w, h, map.width(), map.height()));
    }
    let corners = [bbox.x0, bbox.y0, bbox.x1, bbox.y1];
    let overlaps = bbox.x0 < bbox.x1
        && bbox.y0 < bbox.y1
        && bbox.x1 > 0.0
        && bbox.y1 > 0.0
        && bbox.x0 < w as f64
        && bbox.y0 < h as f64;
    if !overlaps || corners.iter().any(|v| !v.is_finite()) {
        return Err(DatagenError::BoxOutsideFrame(corners));
    }
    let image = imageops::resize(frame, RESIZED_WIDTH, RESIZED_HEIGHT, FilterType::Triangle);
    let resized = resize_map(map, RESIZED_WIDTH, RESIZED_HEIGHT);
    let scale_x = w as f64 / RESIZED_WIDTH as f64;
    let scale_y = h as f64 / RESIZED_HEIGHT as f64;
    let (cx, cy) = bbox.center();
    let col = crop_start(cx / scale_x, RESIZED_WIDTH);
    let row = crop_start(cy / scale_y, RESIZED_HEIGHT);

    let image = imageops::crop_imm(&image, col, row, CROP_SIZE, CROP_SIZE).to_image();
    let mut patch_map = CoordinateMap::empty(CROP_SIZE, CROP_SIZE);
    for r in 0..CROP_SIZE {
        for c in 0..CROP_SIZE {
            if let Some(uv) = resized.get(col + c, row + r) {
                patch_map.set(c, r, uv);
            }
        }
    }
    Ok(Patch {
        image,
        map: patch_map,
        provenance: PatchProvenance {
            source_width: w,
            source_height: h,
            scale_x,
            scale_y,
            crop_row: row,
            crop_col: col,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_is_clamped_at_the_border() {
        assert_eq!(crop_start(0.0, RESIZED_WIDTH), 0);
        assert_eq!(crop_start(500.0, RESIZED_WIDTH), RESIZED_WIDTH - CROP_SIZE);
        assert_eq!(crop_start(54.0, RESIZED_HEIGHT), 22);
    }

    #[test]
    fn nearest_source_stays_in_range() {
        for i in 0..RESIZED_WIDTH {
            assert!(nearest_source(i, 1920, RESIZED_WIDTH) < 1920);
        }
        assert_eq!(nearest_source(0, 1920, 192), 5);
    }
}
