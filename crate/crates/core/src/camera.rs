//! Pinhole camera, rigid poses and the pose file format.
//!
//! Pixel `(c, r)` covers `[c, c + 1) × [r, r + 1)` in image coordinates, so its
//! center is at `(c + 0.5, r + 0.5)`. The principal point defaults to the
//! image center `(W / 2, H / 2)`.

use crate::Vec3;
use nalgebra::{Matrix3, Rotation3, Unit, Vector2};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Tolerance for the orthonormality checks on rotations.
pub const ROTATION_TOL: f64 = 1e-9;

/// Focal length used throughout the examples and the synthetic benchmark.
pub const DEFAULT_FOCAL: f64 = 50_000.0;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("focal length must be positive, got {0}")]
    InvalidFocal(f64),
    #[error("image size {width}x{height} must be nonzero")]
    InvalidSize { width: u32, height: u32 },
    #[error("principal point ({cx}, {cy}) outside the {width}x{height} image")]
    PrincipalOutside {
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    },
    #[error("rotation is not orthonormal with det +1 (deviation {0:e})")]
    NotRotation(f64),
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("pose record: {0}")]
    Format(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    /// Camera with the principal point at the image center.
    pub fn new(focal: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        let cam = Self {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(CameraError::InvalidFocal(self.focal));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::InvalidSize {
                width: self.width,
                height: self.height,
            });
        }
        let inside = |c: f64, n: u32| (0.0..n as f64).contains(&c);
        if !inside(self.cx, self.width) || !inside(self.cy, self.height) {
            return Err(CameraError::PrincipalOutside {
                cx: self.cx,
                cy: self.cy,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Projects a point given in camera coordinates.
    pub fn project_camera_point(&self, q: &Vec3) -> Result<Vector2<f64>, CameraError> {
        if q.z <= 0.0 {
            return Err(CameraError::BehindCamera(q.z));
        }
        Ok(Vector2::new(
            self.focal * q.x / q.z + self.cx,
            self.focal * q.y / q.z + self.cy,
        ))
    }

    /// Projects a mesh point: `(f x / z + cx, f y / z + cy)` with
    /// `(x, y, z) = R p + t`.
    pub fn project(&self, pose: &Pose, p: &Vec3) -> Result<Vector2<f64>, CameraError> {
        self.project_camera_point(&pose.transform_point(p))
    }

    /// Image-plane center of pixel `(col, row)`.
    pub fn pixel_center(col: u32, row: u32) -> Vector2<f64> {
        Vector2::new(col as f64 + 0.5, row as f64 + 0.5)
    }
}

/// Rigid transform from mesh coordinates to camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, CameraError> {
        let pose = Self {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Rotation `angle` radians about `axis`, then translation.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    /// Rotation from an axis-angle vector (exponential map).
    pub fn from_rotation_vector(w: &Vec3, translation: Vec3) -> Self {
        Self {
            rotation: *Rotation3::new(*w).matrix(),
            translation,
        }
    }

    /// Largest deviation from `RᵀR = I` and `det R = 1`.
    pub fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        ortho.max((r.determinant() - 1.0).abs())
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let dev = Self::rotation_deviation(&self.rotation);
        if !(dev <= ROTATION_TOL) || !self.translation.iter().all(|x| x.is_finite()) {
            return Err(CameraError::NotRotation(dev));
        }
        Ok(())
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Nearest rotation (polar factor) of the stored matrix.
    pub fn orthonormalized(&self) -> Pose {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let mut d = Matrix3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Pose {
            rotation: u * d * vt,
            translation: self.translation,
        }
    }
}

pub const POSE_FORMAT: &str = "surfreg-pose";
pub const POSE_FORMAT_VERSION: u32 = 1;

/// On-disk pose record (JSON).
///
/// ```json
/// {"format": "surfreg-pose", "version": 1,
///  "rotation": [r00, r01, r02, r10, r11, r12, r20, r21, r22],
///  "translation": [tx, ty, tz],
///  "camera": {"focal": 50000.0, "cx": 960.0, "cy": 540.0, "width": 1920, "height": 1080}}
/// ```
///
/// Rotation is row-major, translation in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub format: String,
    pub version: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub camera: CameraModel,
}

impl PoseRecord {
    pub fn new(pose: &Pose, camera: &CameraModel) -> Self {
        let r = &pose.rotation;
        Self {
            format: POSE_FORMAT.into(),
            version: POSE_FORMAT_VERSION,
            rotation: std::array::from_fn(|k| r[(k / 3, k % 3)]),
            translation: [pose.translation.x, pose.translation.y, pose.translation.z],
            camera: *camera,
        }
    }

    /// Checks format, version, camera and rotation.
    pub fn pose(&self) -> Result<Pose, CameraError> {
        if self.format != POSE_FORMAT {
            return Err(CameraError::Format(format!(
                "format is `{}`, expected `{POSE_FORMAT}`",
                self.format
            )));
        }
        if self.version != POSE_FORMAT_VERSION {
            return Err(CameraError::Format(format!(
                "unsupported version {}",
                self.version
            )));
        }
        self.camera.validate()?;
        Pose::new(
            Matrix3::from_row_slice(&self.rotation),
            Vec3::from(self.translation),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pose record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CameraError> {
        let rec: Self =
            serde_json::from_str(text).map_err(|e| CameraError::Format(e.to_string()))?;
        rec.pose()?;
        Ok(rec)
    }

    pub fn read(path: &Path) -> Result<Self, CameraError> {
        let text = std::fs::read_to_string(path).map_err(|source| CameraError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), CameraError> {
        std::fs::write(path, self.to_json()).map_err(|source| CameraError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
