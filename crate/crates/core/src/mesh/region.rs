use super::{check_orientation, MeshError, Topology, TriangleMesh};
use std::sync::Arc;

/// A vertex-selected sub-surface of a parent mesh.
///
/// `local` holds the induced faces re-indexed into `0..vertex_ids.len()`;
/// `vertex_ids[local]` is the parent index and `to_local[parent]` the inverse.
#[derive(Debug, Clone)]
pub struct RegionMesh {
    parent: Arc<TriangleMesh>,
    vertex_ids: Vec<usize>,
    to_local: Vec<Option<usize>>,
    parent_faces: Vec<usize>,
    local: TriangleMesh,
}

impl RegionMesh {
    pub fn parent(&self) -> &Arc<TriangleMesh> {
        &self.parent
    }

    /// Parent indices of the region vertices, ascending.
    pub fn vertex_ids(&self) -> &[usize] {
        &self.vertex_ids
    }

    /// Parent index of each induced face.
    pub fn parent_faces(&self) -> &[usize] {
        &self.parent_faces
    }

    /// The region as a standalone mesh with local indices.
    pub fn mesh(&self) -> &TriangleMesh {
        &self.local
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn to_parent(&self, local: usize) -> usize {
        self.vertex_ids[local]
    }

    pub fn to_local(&self, parent: usize) -> Option<usize> {
        self.to_local.get(parent).copied().flatten()
    }
}

/// Selects the faces whose three vertices are all in `vertex_ids`.
///
/// The selection must induce at least one face, be edge-connected, and be
/// consistently oriented.
pub fn extract_region(
    mesh: Arc<TriangleMesh>,
    vertex_ids: &[usize],
) -> Result<RegionMesh, MeshError> {
    let count = mesh.vertex_count();
    let mut ids: Vec<usize> = vertex_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&id| id >= count) {
        return Err(MeshError::InvalidVertexId { id: bad, count });
    }
    let mut to_local = vec![None; count];
    for (local, &id) in ids.iter().enumerate() {
        to_local[id] = Some(local);
    }
    let mut parent_faces = Vec::new();
    let mut local_faces = Vec::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        if let (Some(a), Some(b), Some(c)) = (to_local[f[0]], to_local[f[1]], to_local[f[2]]) {
            parent_faces.push(fi);
            local_faces.push([a, b, c]);
        }
    }
    if local_faces.is_empty() {
        return Err(MeshError::EmptyRegion);
    }
    check_orientation(&local_faces)?;
    let topo = Topology::new(ids.len(), &local_faces);
    let components = topo.component_count();
    if components != 1 {
        return Err(MeshError::Disconnected { components });
    }
    let positions = ids.iter().map(|&id| mesh.position(id)).collect();
    let local = TriangleMesh::new(positions, local_faces)?;
    Ok(RegionMesh {
        parent: mesh,
        vertex_ids: ids,
        to_local,
        parent_faces,
        local,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::icosphere;

    #[test]
    fn identity_selection_reproduces_parent() {
        let mesh = Arc::new(icosphere(1));
        let all: Vec<usize> = (0..mesh.vertex_count()).collect();
        let region = extract_region(mesh.clone(), &all).unwrap();
        assert_eq!(region.mesh(), mesh.as_ref());
        assert_eq!(region.parent_faces().len(), mesh.face_count());
    }

    #[test]
    fn single_triangle_selection() {
        let mesh = Arc::new(icosphere(1));
        let f = mesh.faces()[5];
        let region = extract_region(mesh.clone(), &f).unwrap();
        assert_eq!(region.mesh().face_count(), 1);
        assert_eq!(region.parent_faces(), &[5]);
        for local in 0..3 {
            assert_eq!(region.to_local(region.to_parent(local)), Some(local));
        }
    }

    #[test]
    fn two_unconnected_ids_induce_nothing() {
        let mesh = Arc::new(icosphere(1));
        let topo = Topology::new(mesh.vertex_count(), mesh.faces());
        let far = (1..mesh.vertex_count())
            .find(|&v| !topo.neighbors(0).contains(&v))
            .unwrap();
        assert!(matches!(
            extract_region(mesh, &[0, far]),
            Err(MeshError::EmptyRegion)
        ));
    }

    #[test]
    fn disconnected_selection_reports_components() {
        let mesh = Arc::new(icosphere(1));
        let f0 = mesh.faces()[0];
        let topo = Topology::new(mesh.vertex_count(), mesh.faces());
        let far_face = mesh
            .faces()
            .iter()
            .find(|g| {
                g.iter()
                    .all(|v| !f0.contains(v) && f0.iter().all(|u| !topo.neighbors(*u).contains(v)))
            })
            .copied()
            .unwrap();
        let mut ids = f0.to_vec();
        ids.extend_from_slice(&far_face);
        assert!(matches!(
            extract_region(mesh, &ids),
            Err(MeshError::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn region_faces_reembed_into_parent() {
        let mesh = Arc::new(icosphere(2));
        let ids: Vec<usize> = (0..mesh.vertex_count())
            .filter(|&v| mesh.position(v).z > 0.2)
            .collect();
        let region = extract_region(mesh.clone(), &ids).unwrap();
        for (lf, &pf) in region.mesh().faces().iter().zip(region.parent_faces()) {
            let back = lf.map(|v| region.to_parent(v));
            assert_eq!(back, mesh.faces()[pf]);
        }
    }
}
