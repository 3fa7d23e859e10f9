//! Rendered scenes with known poses, and the round trip back to a pose.
//!
//! A scene directory holds `manifest.jsonl` plus one coordinate map PNG and
//! one pose JSON per sample. The manifest's first line is a [`SceneHeader`];
//! each following line is a [`SampleRecord`].

use super::{io_err, sub_seed, AugmentRanges, DatagenError};
use crate::camera::{CameraModel, Pose, PoseRecord};
use crate::geodesic::SurfaceParameterization;
use crate::pnp::{
    extract_correspondences, solve_pnp, solve_pnp_ransac, ParamIndex, PnpError, PnpOptions,
    PnpResult, RansacOptions,
};
use crate::raster::{encode_map, render_coordinate_map, CoordinateMap};
use crate::Vec3;
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCENE_FORMAT: &str = "surfreg-scene";
pub const SCENE_FORMAT_VERSION: u32 = 1;

/// Random poses that show the outer face of a dome built around +z.
///
/// The model is turned over (180° about x) so its +z side faces the camera,
/// then rotated about the optical axis by a yaw in `[-max_yaw, max_yaw]` and
/// tilted about x and y by up to `max_tilt`. The translation is drawn
/// uniformly from the given boxes, in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSampler {
    pub max_yaw_deg: f64,
    pub max_tilt_deg: f64,
    pub max_x_mm: f64,
    pub max_y_mm: f64,
    pub z_mm: [f64; 2],
}

impl Default for PoseSampler {
    fn default() -> Self {
        Self {
            max_yaw_deg: 180.0,
            max_tilt_deg: 30.0,
            max_x_mm: 4.0,
            max_y_mm: 3.0,
            z_mm: [600.0, 800.0],
        }
    }
}

impl PoseSampler {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let ranges = [self.max_yaw_deg, self.max_tilt_deg, self.max_x_mm, self.max_y_mm];
        if ranges.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(DatagenError::Sampler("ranges must be finite and non-negative".into()));
        }
        let [z0, z1] = self.z_mm;
        if !(z0 > 0.0 && z0 <= z1 && z1.is_finite()) {
            return Err(DatagenError::Sampler(format!("bad depth range [{z0}, {z1}]")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Pose {
        let mut sym = |m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
        let yaw = sym(self.max_yaw_deg).to_radians();
        let tilt_x = sym(self.max_tilt_deg).to_radians();
        let tilt_y = sym(self.max_tilt_deg).to_radians();
        let x = sym(self.max_x_mm);
        let y = sym(self.max_y_mm);
        let [z0, z1] = self.z_mm;
        let z = if z1 > z0 { rng.random_range(z0..=z1) } else { z0 };
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), tilt_y)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), tilt_x)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        Pose {
            rotation: r.into_inner(),
            translation: Vec3::new(x, y, z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub index: usize,
    pub seed: u64,
    pub pose: Pose,
    pub map: CoordinateMap,
    /// Poses drawn until one showed the region.
    pub attempts: usize,
}

/// Renders `n` samples; sample `i` draws its pose from `sub_seed(seed, i)`,
/// redrawing while the region is not visible, at most `max_attempts` times.
pub fn generate_scene(
    param: &SurfaceParameterization,
    camera: &CameraModel,
    sampler: &PoseSampler,
    n: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<SceneSample>, DatagenError> {
    camera.validate()?;
    sampler.validate()?;
    (0..n)
        .into_par_iter()
        .map(|index| {
            let s = sub_seed(seed, index);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            for attempt in 1..=max_attempts {
                let pose = sampler.sample(&mut rng);
                let map = render_coordinate_map(param, camera, &pose)?;
                if map.valid_count() > 0 {
                    return Ok(SceneSample {
                        index,
                        seed: s,
                        pose,
                        map,
                        attempts: attempt,
                    });
                }
            }
            Err(DatagenError::NothingVisible {
                index,
                attempts: max_attempts,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub count: usize,
    pub camera: CameraModel,
    pub sampler: PoseSampler,
    pub augmentation: AugmentRanges,
    /// Parent-mesh vertex ids of the poles.
    pub alpha: usize,
    pub beta: usize,
    pub region_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub index: usize,
    pub seed: u64,
    pub attempts: usize,
    pub valid_pixels: usize,
    /// Paths relative to the scene directory.
    pub map: String,
    pub pose: String,
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

pub fn sample_id(index: usize) -> String {
    format!("{index:05}")
}

/// Writes the maps, poses and manifest of a generated scene into `dir`.
pub fn write_scene(
    dir: &Path,
    param: &SurfaceParameterization,
    camera: &CameraModel,
    sampler: &PoseSampler,
    seed: u64,
    samples: &[SceneSample],
) -> Result<SceneHeader, DatagenError> {
    for sub in ["maps", "poses"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    let header = SceneHeader {
        format: SCENE_FORMAT.into(),
        version: SCENE_FORMAT_VERSION,
        seed,
        count: samples.len(),
        camera: *camera,
        sampler: *sampler,
        augmentation: AugmentRanges::default(),
        alpha: param.alpha(),
        beta: param.beta(),
        region_vertices: param.region().vertex_count(),
    };
    let mut manifest = serde_json::to_string(&header).expect("header serializes");
    manifest.push('\n');
    let encoded: Vec<Vec<u8>> = samples
        .par_iter()
        .map(|s| encode_map(&s.map))
        .collect::<Result<_, _>>()?;
    for (s, png) in samples.iter().zip(encoded) {
        let id = sample_id(s.index);
        let map_rel = format!("maps/{id}.png");
        let pose_rel = format!("poses/{id}.json");
        let map_path = dir.join(&map_rel);
        std::fs::write(&map_path, png).map_err(io_err(&map_path))?;
        let rec = PoseRecord::new(&s.pose, camera);
        rec.write(&dir.join(&pose_rel))?;
        let line = SampleRecord {
            id,
            index: s.index,
            seed: s.seed,
            attempts: s.attempts,
            valid_pixels: s.map.valid_count(),
            map: map_rel,
            pose: pose_rel,
            rotation: rec.rotation,
            translation: rec.translation,
        };
        manifest.push_str(&serde_json::to_string(&line).expect("record serializes"));
        manifest.push('\n');
    }
    let path = dir.join("manifest.jsonl");
    std::fs::write(&path, manifest).map_err(io_err(&path))?;
    Ok(header)
}

pub fn read_manifest(text: &str) -> Result<(SceneHeader, Vec<SampleRecord>), DatagenError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| DatagenError::Manifest("empty manifest".into()))?;
    let header: SceneHeader =
        serde_json::from_str(first).map_err(|e| DatagenError::Manifest(e.to_string()))?;
    if header.format != SCENE_FORMAT || header.version != SCENE_FORMAT_VERSION {
        return Err(DatagenError::Manifest(format!(
            "unsupported format {} version {}",
            header.format, header.version
        )));
    }
    let records = lines
        .map(|l| serde_json::from_str(l).map_err(|e| DatagenError::Manifest(e.to_string())))
        .collect::<Result<Vec<SampleRecord>, _>>()?;
    if records.len() != header.count {
        return Err(DatagenError::Manifest(format!(
            "header announces {} samples, found {}",
            header.count,
            records.len()
        )));
    }
    Ok((header, records))
}

/// Map → correspondences → pose, with consensus when `ransac` is given.
pub fn estimate_pose(
    map: &CoordinateMap,
    index: &ParamIndex,
    camera: &CameraModel,
    solver: &PnpOptions,
    ransac: Option<&RansacOptions>,
) -> Result<PnpResult, PnpError> {
    let corr = extract_correspondences(map, index);
    match ransac {
        Some(opts) => solve_pnp_ransac(&corr, camera, opts),
        None => solve_pnp(&corr, camera, solver),
    }
}
