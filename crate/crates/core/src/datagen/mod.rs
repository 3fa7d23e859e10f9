//! Synthetic data: training patches, augmentation, an oracle correspondence
//! predictor and whole rendered scenes with known poses.
//!
//! Every random choice flows from an explicit `u64` seed. Batch operations
//! derive a per-item seed with [`sub_seed`] so items can be produced in
//! parallel and still come out identical on every run.

mod augment;
mod noise;
mod patch;
mod scene;

pub use augment::{apply_transform, augment, AugmentRanges, Augmented, Transform};
pub use noise::{oracle_predict, NoiseKind, NoiseSpec};
pub use patch::{make_patch, BoundingBox, Patch, PatchProvenance, CROP_SIZE, RESIZED_HEIGHT, RESIZED_WIDTH};
pub use scene::{
    estimate_pose, generate_scene, read_manifest, sample_id, write_scene, PoseSampler, SceneHeader, SceneSample,
    SampleRecord, SCENE_FORMAT, SCENE_FORMAT_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("bounding box {0:?} does not overlap the frame")]
    BoxOutsideFrame([f64; 4]),
    #[error("image is {0}x{1} but the map is {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("frame is smaller than the {0}x{0} crop")]
    FrameTooSmall(u32),
    #[error("unknown noise kind `{0}` (expected gaussian, dropout or outlier)")]
    UnknownNoise(String),
    #[error("invalid noise magnitude {1} for {0}")]
    NoiseMagnitude(&'static str, f64),
    #[error("invalid noise spec `{0}` (expected kind:magnitude)")]
    NoiseSyntax(String),
    #[error("invalid sampler: {0}")]
    Sampler(String),
    #[error("sample {index}: no visible pixels after {attempts} attempts")]
    NothingVisible { index: usize, attempts: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Camera(#[from] crate::camera::CameraError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Seed of the `index`-th item of a batch drawn with `seed`.
pub fn sub_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io {
        path: path.display().to_string(),
        source,
    }
}
