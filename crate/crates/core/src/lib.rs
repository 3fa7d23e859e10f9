//! Marker-free 2D-to-3D registration from dense surface coordinate maps.
//!
//! The pipeline: a visible region of a triangle mesh is parameterized with
//! geodesic latitude/longitude coordinates (`geodesic`), rendered into
//! coordinate maps under a pinhole camera (`camera`, `raster`), turned back
//! into 2D-3D correspondences and solved for the 6D pose (`pnp`), then scored
//! (`metrics`). `datagen` supplies patch preparation, augmentation and an
//! oracle correspondence predictor for synthetic experiments.

pub mod camera;
pub mod datagen;
pub mod geodesic;
pub mod mesh;
pub mod metrics;
pub mod pnp;
pub mod raster;
pub mod shapes;

pub use camera::{CameraModel, Pose};
pub use geodesic::{DistanceField, GeodesicPath, SurfaceParameterization};
pub use mesh::{RegionMesh, TriangleMesh};
pub use raster::CoordinateMap;

/// 3D point/vector type used throughout (millimeters).
pub type Vec3 = nalgebra::Vector3<f64>;
