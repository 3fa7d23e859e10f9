//! Overlay rendering shared by `render` and the HTTP service, so both emit
//! the same bytes for the same pose, frame and camera.

use crate::error::{io_error, CliError};
use image::codecs::png::PngEncoder;
use image::{ImageEncoder, Rgba, RgbaImage};
use std::path::Path;
use surfreg::camera::{CameraModel, Pose};
use surfreg::raster::render_overlay;
use surfreg::SurfaceParameterization;

pub const DEFAULT_OPACITY: f64 = 0.5;

/// Opaque black frame of the camera's size.
pub fn blank_frame(camera: &CameraModel) -> RgbaImage {
    RgbaImage::from_pixel(camera.width, camera.height, Rgba([0, 0, 0, 255]))
}

pub fn decode_frame(bytes: &[u8], camera: &CameraModel) -> Result<RgbaImage, CliError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| CliError::input(format!("frame: {e}")))?
        .to_rgba8();
    if img.dimensions() != (camera.width, camera.height) {
        return Err(CliError::input(format!(
            "frame is {}x{}, the camera is {}x{}",
            img.width(),
            img.height(),
            camera.width,
            camera.height
        )));
    }
    Ok(img)
}

pub fn read_frame(path: &Path, camera: &CameraModel) -> Result<RgbaImage, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    decode_frame(&bytes, camera).map_err(|e| e.context(path.display()))
}

pub fn encode_rgba(img: &RgbaImage) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgba8)
        .map_err(|e| CliError::input(format!("png: {e}")))?;
    Ok(out)
}

/// PNG bytes of the region drawn over `frame` at `opacity`.
pub fn overlay_png(
    param: &SurfaceParameterization,
    camera: &CameraModel,
    pose: &Pose,
    frame: &RgbaImage,
    opacity: f64,
) -> Result<Vec<u8>, CliError> {
    let img = render_overlay(param, camera, pose, frame, opacity)?;
    encode_rgba(&img)
}
