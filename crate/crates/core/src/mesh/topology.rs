use std::collections::HashMap;

/// Adjacency tables derived from a face list.
#[derive(Debug, Clone)]
pub struct Topology {
    vertex_faces: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    edge_faces: HashMap<(usize, usize), Vec<usize>>,
}

impl Topology {
    pub fn new(vertex_count: usize, faces: &[[usize; 3]]) -> Self {
        let mut vertex_faces = vec![Vec::new(); vertex_count];
        let mut neighbors = vec![Vec::new(); vertex_count];
        let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                vertex_faces[a].push(fi);
                edge_faces.entry(edge_key(a, b)).or_default().push(fi);
                if !neighbors[a].contains(&b) {
                    neighbors[a].push(b);
                }
                if !neighbors[b].contains(&a) {
                    neighbors[b].push(a);
                }
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Self {
            vertex_faces,
            neighbors,
            edge_faces,
        }
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn edge_faces(&self, a: usize, b: usize) -> &[usize] {
        self.edge_faces
            .get(&edge_key(a, b))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// The face across edge (a, b) from `face`, if any.
    pub fn opposite_face(&self, a: usize, b: usize, face: usize) -> Option<usize> {
        self.edge_faces(a, b).iter().copied().find(|&f| f != face)
    }

    pub fn is_boundary_edge(&self, a: usize, b: usize) -> bool {
        self.edge_faces(a, b).len() < 2
    }

    /// True when every edge incident to `v` has two faces.
    pub fn is_interior_vertex(&self, v: usize) -> bool {
        self.neighbors[v]
            .iter()
            .all(|&n| !self.is_boundary_edge(v, n))
    }

    /// Number of edge-connected components among vertices that appear in at
    /// least one face, plus isolated vertices.
    pub fn component_count(&self) -> usize {
        let n = self.neighbors.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Vertex of `face` that is neither `a` nor `b`.
pub(crate) fn third_vertex(face: &[usize; 3], a: usize, b: usize) -> usize {
    *face.iter().find(|&&v| v != a && v != b).expect("degenerate face")
}
