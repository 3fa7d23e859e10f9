//! Geodesic distance fields, the prime meridian, and latitude/longitude
//! surface coordinates.
//!
//! For a region with north pole α and south pole β, every vertex gets
//!
//! ```text
//! μ = d_α / (d_α + d_β)      ν = d_l / (d_l + d_r)
//! ```
//!
//! where d_α, d_β are geodesic distances to the poles and d_l, d_r distances
//! to the left and right banks of the prime meridian (the region is slit open
//! along the meridian so the two banks are distinct vertex sets).

mod cut;
mod fmm;
mod io;
mod param;
mod trace;

pub use cut::{cut_along_meridian, ChartVertex, CutMesh};
pub use fmm::{fast_march, fast_march_with, FmmOptions};
pub use io::{read_parameterization, write_parameterization, PARAM_FORMAT_VERSION};
pub use param::{
    parameterize, parameterize_with, transfer_parameterization, Chart, ParamOptions,
    SurfaceParameterization,
};
pub use trace::{trace_meridian, trace_meridian_with, TraceOptions};

use crate::mesh::{MeshError, TriangleMesh};
use crate::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("no source vertices given")]
    EmptySources,
    #[error("source vertex {vertex} out of range ({count} vertices)")]
    SourceOutOfRange { vertex: usize, count: usize },
    #[error("vertex {vertex} is unreachable from the sources (region not connected)")]
    Unreachable { vertex: usize },
    #[error("meridian tracing needs a single-source field, got {0} sources")]
    MultipleSources(usize),
    #[error("north and south pole are the same vertex ({0})")]
    SamePoles(usize),
    #[error("pole vertex {0} is not part of the region")]
    PoleOutsideRegion(usize),
    #[error("meridian trace did not reach the pole after {steps} steps (last position {last:?})")]
    TraceFailed { steps: usize, last: [f64; 3] },
    #[error("cutting along the meridian fails at vertex {vertex}: {reason}")]
    Cut { vertex: usize, reason: String },
    #[error("d_alpha + d_beta vanishes at vertex {0}")]
    DegenerateDistances(usize),
    #[error("target mesh has {got} vertices, parameterization expects {expected}")]
    VertexCountMismatch { expected: usize, got: usize },
    #[error("parameterization file, line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Per-vertex geodesic distances from a source set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    values: Vec<f64>,
    sources: Vec<usize>,
    causes: Vec<f64>,
}

impl DistanceField {
    pub(crate) fn new(values: Vec<f64>, sources: Vec<usize>, causes: Vec<f64>) -> Self {
        Self {
            values,
            sources,
            causes,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Value of the front vertex whose acceptance produced each vertex's
    /// final value (0 for sources).
    pub fn causes(&self) -> &[f64] {
        &self.causes
    }

    /// Linear interpolation inside a face.
    pub fn interpolate(&self, face: &[usize; 3], bary: &[f64; 3]) -> f64 {
        face.iter()
            .zip(bary)
            .map(|(&v, &w)| w * self.values[v])
            .sum()
    }
}

/// A point on the surface: containing face (index into the mesh the path was
/// traced on), barycentric coordinates in that face's vertex order, and the
/// resulting position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: usize,
    pub bary: [f64; 3],
    pub position: Vec3,
}

impl SurfacePoint {
    pub fn at(mesh: &TriangleMesh, face: usize, bary: [f64; 3]) -> Self {
        let f = mesh.faces()[face];
        let position = f
            .iter()
            .zip(&bary)
            .fold(Vec3::zeros(), |acc, (&v, &w)| acc + mesh.position(v) * w);
        Self {
            face,
            bary,
            position,
        }
    }

    /// Where the point sits relative to the mesh: on a vertex, inside an edge,
    /// or in the face interior.
    pub fn location(&self, mesh: &TriangleMesh) -> PointLocation {
        let f = mesh.faces()[self.face];
        let nonzero: Vec<usize> = (0..3).filter(|&k| self.bary[k] != 0.0).collect();
        match nonzero.as_slice() {
            [k] => PointLocation::Vertex(f[*k]),
            [i, j] => {
                let (a, b) = (f[*i], f[*j]);
                let t = self.bary[*j] / (self.bary[*i] + self.bary[*j]);
                if a < b {
                    PointLocation::Edge { a, b, t }
                } else {
                    PointLocation::Edge {
                        a: b,
                        b: a,
                        t: 1.0 - t,
                    }
                }
            }
            _ => PointLocation::Face(self.face),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointLocation {
    Vertex(usize),
    /// Point `(1 - t) * a + t * b` with `a < b`.
    Edge { a: usize, b: usize, t: f64 },
    Face(usize),
}

/// Polyline on the surface from the north pole to the south pole.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    points: Vec<SurfacePoint>,
}

impl GeodesicPath {
    pub fn new(points: Vec<SurfacePoint>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[SurfacePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of segment lengths.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }
}
