//! Geometric augmentation applied identically to an image and its map.
//!
//! A transform flips about the image center, rotates about it, then
//! translates. Outputs are produced by inverse mapping: each output pixel
//! center is carried back into the source, where the image is sampled
//! bilinearly and the map by nearest neighbor at the same coordinates.
//! Samples falling outside the source are black / invalid.

use super::{sub_seed, DatagenError};
use crate::raster::CoordinateMap;
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Transform {
    pub hflip: bool,
    pub vflip: bool,
    /// Rotation in degrees, from +x toward +y in pixel coordinates.
    pub angle_deg: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Transform {
    fn cos_sin(&self) -> (f64, f64) {
        // exact values on the axes so quarter turns permute pixels exactly
        let a = self.angle_deg.rem_euclid(360.0);
        match a {
            0.0 => (1.0, 0.0),
            90.0 => (0.0, 1.0),
            180.0 => (-1.0, 0.0),
            270.0 => (0.0, -1.0),
            _ => {
                let r = a.to_radians();
                (r.cos(), r.sin())
            }
        }
    }

    /// Source position (continuous pixel index) of output pixel `(col, row)`.
    pub fn source_of(&self, col: u32, row: u32, width: u32, height: u32) -> (f64, f64) {
        let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
        let (c, s) = self.cos_sin();
        let qx = col as f64 + 0.5 - cx - self.tx;
        let qy = row as f64 + 0.5 - cy - self.ty;
        let (mut rx, mut ry) = (c * qx + s * qy, -s * qx + c * qy);
        if self.hflip {
            rx = -rx;
        }
        if self.vflip {
            ry = -ry;
        }
        (snap(rx + cx - 0.5), snap(ry + cy - 0.5))
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn bilinear(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let mut acc = [0.0f64; 3];
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let (sx, sy) = (x0 + dx, y0 + dy);
            if sx < 0.0 || sy < 0.0 || sx >= img.width() as f64 || sy >= img.height() as f64 {
                continue;
            }
            let p = img.get_pixel(sx as u32, sy as u32).0;
            for k in 0..3 {
                acc[k] += w * p[k] as f64;
            }
        }
    }
    Rgb(acc.map(|v| v.round().clamp(0.0, 255.0) as u8))
}

/// Warps an image and its map with the same transform.
pub fn apply_transform(
    image: &RgbImage,
    map: &CoordinateMap,
    t: &Transform,
) -> Result<(RgbImage, CoordinateMap), DatagenError> {
    let (w, h) = image.dimensions();
    if (w, h) != (map.width(), map.height()) {
        return Err(DatagenError::SizeMismatch(w, h, map.width(), map.height()));
    }
    let mut out_img = RgbImage::new(w, h);
    let mut out_map = CoordinateMap::empty(w, h);
    for row in 0..h {
        for col in 0..w {
            let (sx, sy) = t.source_of(col, row, w, h);
            out_img.put_pixel(col, row, bilinear(image, sx, sy));
            let (nx, ny) = (sx.round(), sy.round());
            if nx >= 0.0 && ny >= 0.0 && nx < w as f64 && ny < h as f64 {
                if let Some(uv) = map.get(nx as u32, ny as u32) {
                    out_map.set(col, row, uv);
                }
            }
        }
    }
    Ok((out_img, out_map))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    pub hflip_probability: f64,
    pub vflip_probability: f64,
    /// Rotation drawn uniformly from `[-max, max]` degrees.
    pub max_rotation_deg: f64,
    /// Each translation component drawn uniformly from `[-max, max]` pixels.
    pub max_translation_px: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self {
            hflip_probability: 0.5,
            vflip_probability: 0.5,
            max_rotation_deg: 30.0,
            max_translation_px: 8.0,
        }
    }
}

impl AugmentRanges {
    pub fn sample(&self, rng: &mut impl Rng) -> Transform {
        let sym = |rng: &mut dyn rand::RngCore, m: f64| {
            if m > 0.0 {
                rng.random_range(-m..=m)
            } else {
                0.0
            }
        };
        let hflip = rng.random_bool(self.hflip_probability.clamp(0.0, 1.0));
        let vflip = rng.random_bool(self.vflip_probability.clamp(0.0, 1.0));
        let angle_deg = sym(rng, self.max_rotation_deg);
        let tx = sym(rng, self.max_translation_px);
        let ty = sym(rng, self.max_translation_px);
        Transform {
            hflip,
            vflip,
            angle_deg,
            tx,
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub transform: Transform,
    pub image: RgbImage,
    pub map: CoordinateMap,
}

/// `count` augmented copies; copy `i` uses transform parameters drawn from
/// `sub_seed(seed, i)`.
pub fn augment(
    image: &RgbImage,
    map: &CoordinateMap,
    count: usize,
    seed: u64,
    ranges: &AugmentRanges,
) -> Result<Vec<Augmented>, DatagenError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, i));
            let transform = ranges.sample(&mut rng);
            let (image, map) = apply_transform(image, map, &transform)?;
            Ok(Augmented {
                transform,
                image,
                map,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_maps_pixel_centers_to_themselves() {
        let t = Transform::default();
        assert_eq!(t.source_of(3, 5, 8, 10), (3.0, 5.0));
    }

    #[test]
    fn hflip_mirrors_columns() {
        let t = Transform {
            hflip: true,
            ..Default::default()
        };
        assert_eq!(t.source_of(0, 2, 8, 4), (7.0, 2.0));
    }
}
