//! Correspondence sets and their text dump.
//!
//! ```text
//! # surfreg-correspondences 1
//! # width height
//! 1920 1080
//! # u v x y z w
//! 960.5 540.5 0.1 -0.2 0.9 1
//! ```
//!
//! `u v` is the pixel center, `x y z` the surface point in mesh millimeters,
//! `w` the weight.

use super::index::ParamIndex;
use super::PnpError;
use crate::camera::CameraModel;
use crate::raster::CoordinateMap;
use crate::Vec3;
use nalgebra::Vector2;
use std::io::Write;

pub const CORRESPONDENCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub pixel: Vector2<f64>,
    pub point: Vec3,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    width: u32,
    height: u32,
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            items: Vec::new(),
        }
    }

    /// Adds a correspondence. Pixels must lie inside the image and weights in
    /// (0, 1]; zero weight is allowed and excludes the point from solving.
    pub fn push(&mut self, c: Correspondence) -> Result<(), PnpError> {
        let inside = (0.0..=self.width as f64).contains(&c.pixel.x)
            && (0.0..=self.height as f64).contains(&c.pixel.y);
        if !inside || !(0.0..=1.0).contains(&c.weight) || !c.point.iter().all(|x| x.is_finite())
        {
            return Err(PnpError::Degenerate(format!(
                "correspondence ({}, {}) -> {:?} with weight {} is out of range",
                c.pixel.x, c.pixel.y, c.point, c.weight
            )));
        }
        self.items.push(c);
        Ok(())
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Subset by index, in the given order.
    pub fn select(&self, ids: &[usize]) -> Self {
        Self {
            width: self.width,
            height: self.height,
            items: ids.iter().map(|&i| self.items[i]).collect(),
        }
    }
}

/// One correspondence per valid pixel, in row-major pixel order, weight 1.
pub fn extract_correspondences(map: &CoordinateMap, index: &ParamIndex) -> CorrespondenceSet {
    let mut set = CorrespondenceSet::new(map.width(), map.height());
    for (x, y, uv) in map.valid_pixels() {
        if let Some(point) = index.lookup(uv) {
            set.items.push(Correspondence {
                pixel: CameraModel::pixel_center(x, y),
                point,
                weight: 1.0,
            });
        }
    }
    set
}

pub fn write_correspondences<W: Write>(set: &CorrespondenceSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# surfreg-correspondences {CORRESPONDENCE_FORMAT_VERSION}")?;
    writeln!(out, "# width height")?;
    writeln!(out, "{} {}", set.width, set.height)?;
    writeln!(out, "# u v x y z w")?;
    for c in &set.items {
        writeln!(
            out,
            "{:?} {:?} {:?} {:?} {:?} {:?}",
            c.pixel.x, c.pixel.y, c.point.x, c.point.y, c.point.z, c.weight
        )?;
    }
    out.flush()
}

pub fn read_correspondences(text: &str) -> Result<CorrespondenceSet, PnpError> {
    let bad = |line: usize, msg: &str| PnpError::Degenerate(format!("line {line}: {msg}"));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == format!("# surfreg-correspondences {CORRESPONDENCE_FORMAT_VERSION}") => {}
        Some((n, _)) => return Err(bad(n, "missing or unsupported header")),
        None => return Err(bad(0, "empty file")),
    }
    let mut data = lines.filter(|(_, l)| !l.starts_with('#'));
    let (n, dims) = data.next().ok_or_else(|| bad(0, "missing image size"))?;
    let dims: Vec<u32> = dims
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| bad(n, "bad image size")))
        .collect::<Result<_, _>>()?;
    let [width, height] = dims[..] else {
        return Err(bad(n, "expected `width height`"));
    };
    let mut set = CorrespondenceSet::new(width, height);
    for (n, line) in data {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| bad(n, "bad number")))
            .collect::<Result<_, _>>()?;
        let [u, vv, x, y, z, w] = v[..] else {
            return Err(bad(n, "expected `u v x y z w`"));
        };
        set.push(Correspondence {
            pixel: Vector2::new(u, vv),
            point: Vec3::new(x, y, z),
            weight: w,
        })?;
    }
    Ok(set)
}
