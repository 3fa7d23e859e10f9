//! Software rasterization of coordinate maps, the 16-bit PNG codec for them,
//! and overlay rendering.
//!
//! A pixel is covered when its center lies inside the projected triangle.
//! Pixel centers exactly on an edge belong to one of the two triangles sharing
//! it (for a positively oriented triangle, edges running toward +y or along
//! -x own their boundary), so closed meshes are covered without gaps or double
//! hits. Attributes are interpolated perspective-correctly; the nearest
//! surface wins the depth test, with ties going to the lower face index.

use crate::camera::{CameraError, CameraModel, Pose};
use crate::geodesic::SurfaceParameterization;
use crate::mesh::TriangleMesh;
use crate::Vec3;
use image::{DynamicImage, ImageBuffer, ImageFormat, Rgb, RgbaImage};
use nalgebra::Vector2;
use rayon::prelude::*;
use std::io::Cursor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image is {got_width}x{got_height}, expected {width}x{height}")]
    SizeMismatch {
        width: u32,
        height: u32,
        got_width: u32,
        got_height: u32,
    },
    #[error("{0} attribute values for {1} vertices")]
    AttributeCount(usize, usize),
    #[error("opacity must lie in [0, 1], got {0}")]
    Opacity(f64),
    #[error("not a coordinate map: {0}")]
    Format(String),
    #[error("png: {0}")]
    Png(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Per-pixel (μ, ν) with validity and optional depth.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    width: u32,
    height: u32,
    uv: Vec<[f64; 2]>,
    valid: Vec<bool>,
    depth: Option<Vec<f64>>,
}

impl CoordinateMap {
    /// All pixels invalid.
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            uv: vec![[0.0; 2]; n],
            valid: vec![false; n],
            depth: None,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn index(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of range");
        y as usize * self.width as usize + x as usize
    }

    /// (μ, ν) of a valid pixel.
    pub fn get(&self, x: u32, y: u32) -> Option<[f64; 2]> {
        let i = self.index(x, y);
        self.valid[i].then(|| self.uv[i])
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[self.index(x, y)]
    }

    pub fn depth(&self, x: u32, y: u32) -> Option<f64> {
        let i = self.index(x, y);
        match &self.depth {
            Some(d) if self.valid[i] => Some(d[i]),
            _ => None,
        }
    }

    pub fn has_depth(&self) -> bool {
        self.depth.is_some()
    }

    /// Marks a pixel valid with the given values, clamped to [0, 1]. Depth, if
    /// stored, is left unchanged.
    pub fn set(&mut self, x: u32, y: u32, uv: [f64; 2]) {
        let i = self.index(x, y);
        self.uv[i] = [uv[0].clamp(0.0, 1.0), uv[1].clamp(0.0, 1.0)];
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, x: u32, y: u32) {
        let i = self.index(x, y);
        self.valid[i] = false;
        self.uv[i] = [0.0; 2];
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid pixels in row-major order as `(x, y, [μ, ν])`.
    pub fn valid_pixels(&self) -> impl Iterator<Item = (u32, u32, [f64; 2])> + '_ {
        let w = self.width as usize;
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32, self.uv[i]))
    }

    /// Same map without depth (what a decoded or predicted map carries).
    pub fn without_depth(&self) -> Self {
        Self {
            depth: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub cull_backfaces: bool,
    /// Rows per parallel band.
    pub band_rows: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            cull_backfaces: true,
            band_rows: 16,
        }
    }
}

/// What the rasterizer saw at one pixel: the winning face, perspective-correct
/// barycentric weights in that face's vertex order, and camera-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub face: usize,
    pub bary: [f64; 3],
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fragments {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Option<Fragment>>,
}

impl Fragments {
    pub fn get(&self, x: u32, y: u32) -> Option<&Fragment> {
        self.pixels[y as usize * self.width as usize + x as usize].as_ref()
    }
}

struct Setup {
    face: usize,
    /// Vertices 1 and 2 were swapped to make the screen area positive.
    swapped: bool,
    screen: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    area: f64,
    rows: (u32, u32),
    cols: (u32, u32),
}

fn cross2(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Whether a positively oriented edge along `d` owns the pixel centers lying
/// exactly on it.
fn owns_boundary(d: Vector2<f64>) -> bool {
    d.y > 0.0 || (d.y == 0.0 && d.x < 0.0)
}

fn setup_faces(
    mesh: &TriangleMesh,
    camera: &CameraModel,
    pose: &Pose,
    opts: &RenderOptions,
) -> Vec<Setup> {
    let cam: Vec<Vec3> = mesh.vertices().iter().map(|p| pose.transform_point(p)).collect();
    let (w, h) = (camera.width as f64, camera.height as f64);
    let mut out = Vec::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let q = f.map(|v| cam[v]);
        // no near-plane clipping: faces reaching behind the camera are dropped
        if q.iter().any(|p| p.z <= 0.0) {
            continue;
        }
        if opts.cull_backfaces {
            let n = (q[1] - q[0]).cross(&(q[2] - q[0]));
            if n.dot(&q[0]) >= 0.0 {
                continue;
            }
        }
        let Ok(s0) = camera.project_camera_point(&q[0]) else { continue };
        let Ok(s1) = camera.project_camera_point(&q[1]) else { continue };
        let Ok(s2) = camera.project_camera_point(&q[2]) else { continue };
        let mut screen = [s0, s1, s2];
        let mut inv_z = q.map(|p| 1.0 / p.z);
        let mut area = cross2(s1 - s0, s2 - s0);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let swapped = area < 0.0;
        if swapped {
            screen.swap(1, 2);
            inv_z.swap(1, 2);
            area = -area;
        }
        let min_x = screen.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
        let max_x = screen.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = screen.iter().map(|s| s.y).fold(f64::INFINITY, f64::min);
        let max_y = screen.iter().map(|s| s.y).fold(f64::NEG_INFINITY, f64::max);
        // pixel c has center c + 0.5
        let c0 = (min_x - 0.5).ceil().max(0.0);
        let c1 = (max_x - 0.5).floor().min(w - 1.0);
        let r0 = (min_y - 0.5).ceil().max(0.0);
        let r1 = (max_y - 0.5).floor().min(h - 1.0);
        if c0 > c1 || r0 > r1 {
            continue;
        }
        out.push(Setup {
            face: fi,
            swapped,
            screen,
            inv_z,
            area,
            rows: (r0 as u32, r1 as u32),
            cols: (c0 as u32, c1 as u32),
        });
    }
    out
}

/// Rasterizes `mesh` under the given camera and pose.
pub fn rasterize(
    mesh: &TriangleMesh,
    camera: &CameraModel,
    pose: &Pose,
    opts: &RenderOptions,
) -> Result<Fragments, RasterError> {
    camera.validate()?;
    let setups = setup_faces(mesh, camera, pose, opts);
    let (w, h) = (camera.width as usize, camera.height as usize);
    let band = opts.band_rows.max(1) as usize;
    let mut pixels: Vec<Option<Fragment>> = vec![None; w * h];
    pixels
        .par_chunks_mut(band * w)
        .enumerate()
        .for_each(|(bi, chunk)| {
            let row0 = (bi * band) as u32;
            let row1 = row0 + (chunk.len() / w) as u32 - 1;
            for s in &setups {
                if s.rows.1 < row0 || s.rows.0 > row1 {
                    continue;
                }
                let [a, b, c] = s.screen;
                let edges = [(b, c), (c, a), (a, b)];
                let owns = edges.map(|(p, q)| owns_boundary(q - p));
                for row in s.rows.0.max(row0)..=s.rows.1.min(row1) {
                    for col in s.cols.0..=s.cols.1 {
                        let p = CameraModel::pixel_center(col, row);
                        let mut lambda = [0.0; 3];
                        let mut inside = true;
                        for k in 0..3 {
                            let (e0, e1) = edges[k];
                            let e = cross2(e1 - e0, p - e0);
                            if e < 0.0 || (e == 0.0 && !owns[k]) {
                                inside = false;
                                break;
                            }
                            lambda[k] = e / s.area;
                        }
                        if !inside {
                            continue;
                        }
                        let wts = [
                            lambda[0] * s.inv_z[0],
                            lambda[1] * s.inv_z[1],
                            lambda[2] * s.inv_z[2],
                        ];
                        let sum = wts[0] + wts[1] + wts[2];
                        if !(sum > 0.0) {
                            continue;
                        }
                        let depth = 1.0 / sum;
                        let slot = &mut chunk[(row - row0) as usize * w + col as usize];
                        if slot.as_ref().is_some_and(|f| f.depth <= depth) {
                            continue;
                        }
                        let mut bary = [wts[0] / sum, wts[1] / sum, wts[2] / sum];
                        if s.swapped {
                            bary.swap(1, 2);
                        }
                        *slot = Some(Fragment {
                            face: s.face,
                            bary,
                            depth,
                        });
                    }
                }
            }
        });
    Ok(Fragments {
        width: camera.width,
        height: camera.height,
        pixels,
    })
}

/// Renders per-vertex (μ, ν) attributes of `mesh`.
pub fn render_attributes(
    mesh: &TriangleMesh,
    uv: &[[f64; 2]],
    camera: &CameraModel,
    pose: &Pose,
    opts: &RenderOptions,
) -> Result<(CoordinateMap, Fragments), RasterError> {
    if uv.len() != mesh.vertex_count() {
        return Err(RasterError::AttributeCount(uv.len(), mesh.vertex_count()));
    }
    let frags = rasterize(mesh, camera, pose, opts)?;
    let mut map = CoordinateMap::empty(camera.width, camera.height);
    let mut depth = vec![0.0; map.uv.len()];
    for (i, frag) in frags.pixels.iter().enumerate() {
        if let Some(fr) = frag {
            let f = mesh.faces()[fr.face];
            let mut val = [0.0; 2];
            for k in 0..3 {
                val[0] += fr.bary[k] * uv[f[k]][0];
                val[1] += fr.bary[k] * uv[f[k]][1];
            }
            map.uv[i] = [val[0].clamp(0.0, 1.0), val[1].clamp(0.0, 1.0)];
            map.valid[i] = true;
            depth[i] = fr.depth;
        }
    }
    map.depth = Some(depth);
    Ok((map, frags))
}

/// Ground-truth coordinate map of a parameterized region, rendered from its
/// chart (the region slit open along the meridian).
pub fn render_coordinate_map(
    param: &SurfaceParameterization,
    camera: &CameraModel,
    pose: &Pose,
) -> Result<CoordinateMap, RasterError> {
    render_coordinate_map_with(param, camera, pose, &RenderOptions::default()).map(|(m, _)| m)
}

pub fn render_coordinate_map_with(
    param: &SurfaceParameterization,
    camera: &CameraModel,
    pose: &Pose,
    opts: &RenderOptions,
) -> Result<(CoordinateMap, Fragments), RasterError> {
    let chart = param.chart();
    render_attributes(&chart.mesh, &chart.uv, camera, pose, opts)
}

const FULL: u16 = u16::MAX;

/// Quantizes a value in [0, 1] to 16 bits.
pub fn quantize(x: f64) -> u16 {
    (x.clamp(0.0, 1.0) * FULL as f64).round() as u16
}

/// 16-bit RGB PNG: R = μ, G = ν, B = 65535 on valid pixels, all zero elsewhere.
pub fn encode_map(map: &CoordinateMap) -> Result<Vec<u8>, RasterError> {
    let mut raw = Vec::with_capacity(map.uv.len() * 3);
    for (uv, &valid) in map.uv.iter().zip(&map.valid) {
        if valid {
            raw.extend_from_slice(&[quantize(uv[0]), quantize(uv[1]), FULL]);
        } else {
            raw.extend_from_slice(&[0, 0, 0]);
        }
    }
    let img: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width, map.height, raw).expect("buffer size matches");
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageRgb16(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| RasterError::Png(e.to_string()))?;
    Ok(out.into_inner())
}

/// Inverse of [`encode_map`]. Pixels whose blue channel is below full scale
/// are invalid.
pub fn decode_map(bytes: &[u8]) -> Result<CoordinateMap, RasterError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| RasterError::Png(e.to_string()))?;
    let DynamicImage::ImageRgb16(img) = img else {
        return Err(RasterError::Format(format!(
            "expected 16-bit RGB, got {:?}",
            img.color()
        )));
    };
    let mut map = CoordinateMap::empty(img.width(), img.height());
    for (i, px) in img.pixels().enumerate() {
        let [r, g, b] = px.0;
        if b == FULL {
            map.uv[i] = [r as f64 / FULL as f64, g as f64 / FULL as f64];
            map.valid[i] = true;
        }
    }
    Ok(map)
}

/// Overlay color of a surface point: (μ, ν) in red and green, full blue.
pub fn overlay_color(uv: [f64; 2]) -> [u8; 3] {
    let q = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    [q(uv[0]), q(uv[1]), 255]
}

/// Alpha-blends `fg` over `bg`: `(1 - a) bg + a fg`, rounded.
pub fn blend(bg: u8, fg: u8, a: f64) -> u8 {
    ((1.0 - a) * bg as f64 + a * fg as f64).round() as u8
}

/// The region rendered over a background frame at the given opacity.
pub fn render_overlay(
    param: &SurfaceParameterization,
    camera: &CameraModel,
    pose: &Pose,
    background: &RgbaImage,
    opacity: f64,
) -> Result<RgbaImage, RasterError> {
    if !(0.0..=1.0).contains(&opacity) {
        return Err(RasterError::Opacity(opacity));
    }
    if background.dimensions() != (camera.width, camera.height) {
        return Err(RasterError::SizeMismatch {
            width: camera.width,
            height: camera.height,
            got_width: background.width(),
            got_height: background.height(),
        });
    }
    let map = render_coordinate_map(param, camera, pose)?;
    Ok(overlay_map(&map, background, opacity))
}

/// Blends the colors of a coordinate map's valid pixels over `background`.
pub fn overlay_map(map: &CoordinateMap, background: &RgbaImage, opacity: f64) -> RgbaImage {
    let mut out = background.clone();
    if opacity == 0.0 {
        return out;
    }
    for (x, y, uv) in map.valid_pixels() {
        let [r, g, b] = overlay_color(uv);
        let px = out.get_pixel_mut(x, y);
        let [br, bgc, bb, ba] = px.0;
        px.0 = [
            blend(br, r, opacity),
            blend(bgc, g, opacity),
            blend(bb, b, opacity),
            blend(ba, 255, opacity),
        ];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_arithmetic() {
        assert_eq!(quantize(0.5), 32768);
        assert_eq!(quantize(0.25), 16384);
        assert_eq!(quantize(1.0), 65535);
    }

    #[test]
    fn blend_spot_check() {
        // 0.75 * 100 + 0.25 * 200 = 125
        assert_eq!(blend(100, 200, 0.25), 125);
        assert_eq!(blend(7, 200, 0.0), 7);
        assert_eq!(blend(7, 200, 1.0), 200);
    }

    #[test]
    fn tie_rule_picks_one_of_two_directions() {
        for d in [
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 1.0),
            Vector2::new(1.0, -2.0),
        ] {
            assert_ne!(owns_boundary(d), owns_boundary(-d));
        }
    }
}
