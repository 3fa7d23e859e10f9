//! Indexed triangle meshes, region selection and file I/O.
//!
//! Vertex order is never changed by anything in this module: parameterizations
//! are transferred between morphed instances of the same template purely by
//! vertex index, so loaders preserve stored order and never weld duplicates.

mod io;
mod region;
pub(crate) mod topology;

pub use io::{
    load_mesh, parse_obj, parse_ply, parse_selection, read_selection, write_obj, write_ply,
    MeshFormat, PlyEncoding,
};
pub use region::{extract_region, RegionMesh};
pub use topology::Topology;

use crate::Vec3;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("face {face} references vertex {index} more than once")]
    RepeatedIndex { face: usize, index: usize },
    #[error("vertex id {id} is out of range for a mesh with {count} vertices")]
    InvalidVertexId { id: usize, count: usize },
    #[error("edge ({a}, {b}) is traversed in the same direction by two faces")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("edge ({a}, {b}) is shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("selection induces no faces")]
    EmptyRegion,
    #[error("selection is not edge-connected ({components} components)")]
    Disconnected { components: usize },
}

/// Indexed triangle surface. Positions are in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    labels: Option<Vec<u32>>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index range and repeated indices per face.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &index in f {
                if index >= count {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index,
                        count,
                    });
                }
            }
            if f[0] == f[1] || f[0] == f[2] {
                return Err(MeshError::RepeatedIndex { face: fi, index: f[0] });
            }
            if f[1] == f[2] {
                return Err(MeshError::RepeatedIndex { face: fi, index: f[1] });
            }
        }
        Ok(Self {
            vertices,
            faces,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self, MeshError> {
        if labels.len() != self.vertices.len() {
            return Err(MeshError::Parse {
                location: "labels".into(),
                message: format!(
                    "{} labels for {} vertices",
                    labels.len(),
                    self.vertices.len()
                ),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn position(&self, v: usize) -> Vec3 {
        self.vertices[v]
    }

    /// Same connectivity, new positions (a "morph"). Vertex count must match.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::InvalidVertexId {
                id: vertices.len(),
                count: self.vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Unnormalized face normal following the winding order.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]))
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for f in &self.faces {
            for k in 0..3 {
                sum += (self.vertices[f[k]] - self.vertices[f[(k + 1) % 3]]).norm();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Checks that every edge has at most two incident faces and that shared
    /// edges are traversed in opposite directions.
    pub fn check_orientation(&self) -> Result<(), MeshError> {
        check_orientation(&self.faces)
    }
}

pub(crate) fn check_orientation(faces: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let seen = directed.entry((a, b)).or_insert(0);
            *seen += 1;
            if *seen > 1 {
                return Err(MeshError::InconsistentOrientation { a, b });
            }
            let key = (a.min(b), a.max(b));
            let count = undirected.entry(key).or_insert(0);
            *count += 1;
            if *count > 2 {
                return Err(MeshError::NonManifoldEdge {
                    a: key.0,
                    b: key.1,
                    count: *count,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_repeated() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(MeshError::IndexOutOfRange { index: 3, .. })
        ));
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 1]]),
            Err(MeshError::RepeatedIndex { index: 1, .. })
        ));
    }

    #[test]
    fn orientation_detects_flipped_neighbour() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        let ok = TriangleMesh::new(v.clone(), vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        ok.check_orientation().unwrap();
        let bad = TriangleMesh::new(v, vec![[0, 1, 2], [2, 3, 1]]).unwrap();
        assert!(matches!(
            bad.check_orientation(),
            Err(MeshError::InconsistentOrientation { .. })
        ));
    }

    #[test]
    fn duplicate_positions_are_kept() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::y()];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(tri().face_normal(0), Vec3::z());
    }
}
