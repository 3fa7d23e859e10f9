//! Slitting a region open along its prime meridian.
//!
//! Meridian points that lie inside edges are first inserted as vertices and
//! the crossed faces re-triangulated so the meridian runs along mesh edges.
//! Every interior meridian vertex is then split in two: faces on the left
//! bank keep the original index, faces on the right bank get a fresh copy.
//! The poles themselves are not split; they end the slit.

use super::{GeodesicError, GeodesicPath, PointLocation};
use crate::mesh::topology::edge_key;
use crate::mesh::{RegionMesh, Topology, TriangleMesh};
use crate::Vec3;
use std::collections::HashMap;

/// How a vertex of the cut mesh is obtained from the region it was cut from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartVertex {
    /// Region vertex (local index), or a copy of one.
    Region(usize),
    /// `(1 - t) * a + t * b` on region edge (a, b), `a < b`.
    Edge { a: usize, b: usize, t: f64 },
}

impl ChartVertex {
    pub fn position(&self, region: &TriangleMesh) -> Vec3 {
        match *self {
            ChartVertex::Region(v) => region.position(v),
            ChartVertex::Edge { a, b, t } => region.position(a) * (1.0 - t) + region.position(b) * t,
        }
    }
}

/// The slit-open region.
#[derive(Debug, Clone)]
pub struct CutMesh {
    /// Cut surface. Its first `region.vertex_count()` vertices are the region
    /// vertices in local order.
    pub mesh: TriangleMesh,
    pub recipes: Vec<ChartVertex>,
    /// Cut-mesh vertex of each meridian point on the left bank.
    pub left: Vec<usize>,
    /// Cut-mesh vertex of each meridian point on the right bank.
    pub right: Vec<usize>,
    /// Number of meridian points inserted into edges.
    pub inserted: usize,
    /// Number of extra vertices created by splitting meridian vertices.
    pub duplicated: usize,
}

impl CutMesh {
    /// Source sets for distances to the left and right bank.
    pub fn banks(&self) -> (&[usize], &[usize]) {
        (&self.left, &self.right)
    }
}

/// Cuts `region` along `meridian` (a path traced on `region.mesh()`).
///
/// A face beside a meridian segment with direction `d` is on the left bank
/// when `d × n` (n the face normal) points into the face.
pub fn cut_along_meridian(
    region: &RegionMesh,
    meridian: &GeodesicPath,
) -> Result<CutMesh, GeodesicError> {
    let base = region.mesh();
    let n = base.vertex_count();
    let pts = meridian.points();
    if pts.len() < 2 {
        return Err(GeodesicError::Cut {
            vertex: 0,
            reason: "meridian has fewer than two points".into(),
        });
    }

    // 1. insert edge points
    let mut recipes: Vec<ChartVertex> = (0..n).map(ChartVertex::Region).collect();
    let mut on_edge: HashMap<(usize, usize), Vec<(f64, usize)>> = HashMap::new();
    let mut point_ids = Vec::with_capacity(pts.len());
    for p in pts {
        let id = match p.location(base) {
            PointLocation::Vertex(v) => v,
            PointLocation::Edge { a, b, t } => {
                let list = on_edge.entry((a, b)).or_default();
                match list.iter().find(|(s, _)| *s == t) {
                    Some(&(_, id)) => id,
                    None => {
                        let id = recipes.len();
                        recipes.push(ChartVertex::Edge { a, b, t });
                        list.push((t, id));
                        id
                    }
                }
            }
            PointLocation::Face(f) => {
                return Err(GeodesicError::Cut {
                    vertex: base.faces()[f][0],
                    reason: "meridian point lies strictly inside a face".into(),
                })
            }
        };
        point_ids.push(id);
    }
    if point_ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(GeodesicError::Cut {
            vertex: point_ids[0],
            reason: "meridian repeats a point".into(),
        });
    }
    let mut path_ids = vec![point_ids[0]];
    let mut chords: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (k, w) in point_ids.windows(2).enumerate() {
        // segment k lies in the face its start point is tagged with
        chords.entry(pts[k].face).or_default().push((w[0], w[1]));
        path_ids.push(w[1]);
    }
    for list in on_edge.values_mut() {
        list.sort_by(|x, y| x.0.total_cmp(&y.0));
    }
    let inserted = recipes.len() - n;
    let positions: Vec<Vec3> = recipes.iter().map(|r| r.position(base)).collect();

    // 2. re-triangulate faces crossed by the meridian
    let mut faces = Vec::with_capacity(base.face_count() + 2 * inserted);
    for (fi, f) in base.faces().iter().enumerate() {
        let mut poly = Vec::with_capacity(3);
        let mut touched = false;
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            poly.push(a);
            if let Some(list) = on_edge.get(&edge_key(a, b)) {
                touched = true;
                if a < b {
                    poly.extend(list.iter().map(|&(_, id)| id));
                } else {
                    poly.extend(list.iter().rev().map(|&(_, id)| id));
                }
            }
        }
        let face_chords = chords.get(&fi).map(Vec::as_slice).unwrap_or(&[]);
        if !touched && face_chords.is_empty() {
            faces.push(*f);
            continue;
        }
        for piece in split_polygon(poly, face_chords) {
            triangulate_convex(&piece, &positions, &mut faces);
        }
    }

    // 3. split interior meridian vertices
    let topo = Topology::new(positions.len(), &faces);
    for w in path_ids.windows(2) {
        if topo.edge_faces(w[0], w[1]).is_empty() {
            return Err(GeodesicError::Cut {
                vertex: w[0],
                reason: format!("meridian segment ({}, {}) is not a mesh edge", w[0], w[1]),
            });
        }
    }
    let mut seen = vec![false; positions.len()];
    for &id in &path_ids {
        if std::mem::replace(&mut seen[id], true) {
            return Err(GeodesicError::Cut {
                vertex: id,
                reason: "meridian visits the vertex twice".into(),
            });
        }
    }
    let mut recipes = recipes;
    let mut positions = positions;
    let mut left = path_ids.clone();
    let mut right = path_ids.clone();
    let last = path_ids.len() - 1;
    for i in 1..last {
        let v = path_ids[i];
        let (prev, prev_copy, next) = (path_ids[i - 1], right[i - 1], path_ids[i + 1]);
        if !topo.is_interior_vertex(v) {
            return Err(GeodesicError::Cut {
                vertex: v,
                reason: "meridian touches the region boundary; the cut would disconnect the region"
                    .into(),
            });
        }
        let incident = topo.vertex_faces(v);
        let separators = [prev, prev_copy, next];
        let groups = fan_groups(&faces, incident, v, &separators);
        let left_face = topo
            .edge_faces(v, next)
            .iter()
            .copied()
            .find(|&f| is_left(&faces[f], &positions, v, next))
            .ok_or_else(|| GeodesicError::Cut {
                vertex: v,
                reason: "no left face along the meridian".into(),
            })?;
        let left_group = groups[incident.iter().position(|&f| f == left_face).unwrap()];
        let distinct: std::collections::BTreeSet<usize> = groups.iter().copied().collect();
        if distinct.len() != 2 {
            return Err(GeodesicError::Cut {
                vertex: v,
                reason: format!("faces around the vertex form {} fans, expected 2", distinct.len()),
            });
        }
        let copy = positions.len();
        positions.push(positions[v]);
        recipes.push(recipes[v]);
        for (&f, &g) in incident.iter().zip(&groups) {
            if g != left_group {
                for slot in faces[f].iter_mut() {
                    if *slot == v {
                        *slot = copy;
                    }
                }
            }
        }
        left[i] = v;
        right[i] = copy;
    }
    let duplicated = positions.len() - n - inserted;
    let mesh = TriangleMesh::new(positions, faces)?;
    Ok(CutMesh {
        mesh,
        recipes,
        left,
        right,
        inserted,
        duplicated,
    })
}

fn is_left(face: &[usize; 3], pos: &[Vec3], from: usize, to: usize) -> bool {
    let [a, b, c] = face.map(|v| pos[v]);
    let normal = (b - a).cross(&(c - a));
    let d = pos[to] - pos[from];
    let centroid = (a + b + c) / 3.0;
    let mid = (pos[to] + pos[from]) * 0.5;
    d.cross(&normal).dot(&(centroid - mid)) > 0.0
}

/// Groups faces around `v` into fans separated by edges to `separators`.
/// Returns a group label per incident face.
fn fan_groups(faces: &[[usize; 3]], incident: &[usize], v: usize, separators: &[usize]) -> Vec<usize> {
    let m = incident.len();
    let mut label: Vec<usize> = (0..m).collect();
    fn find(label: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while label[r] != r {
            r = label[r];
        }
        let mut y = x;
        while label[y] != r {
            let nx = label[y];
            label[y] = r;
            y = nx;
        }
        r
    }
    for i in 0..m {
        for j in i + 1..m {
            let (fi, fj) = (&faces[incident[i]], &faces[incident[j]]);
            let shared = fi
                .iter()
                .any(|&x| x != v && !separators.contains(&x) && fj.contains(&x));
            if shared && fi.contains(&v) && fj.contains(&v) {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                label[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    (0..m).map(|i| find(&mut label, i)).collect()
}

/// Splits a convex polygon along chords between its vertices.
fn split_polygon(poly: Vec<usize>, chords: &[(usize, usize)]) -> Vec<Vec<usize>> {
    for (k, &(u, w)) in chords.iter().enumerate() {
        let (Some(iu), Some(iw)) = (
            poly.iter().position(|&x| x == u),
            poly.iter().position(|&x| x == w),
        ) else {
            continue;
        };
        let len = poly.len();
        let gap = (iw + len - iu) % len;
        if gap <= 1 || gap >= len - 1 {
            continue;
        }
        let walk = |from: usize, to: usize| {
            let mut out = vec![poly[from]];
            let mut i = from;
            while i != to {
                i = (i + 1) % len;
                out.push(poly[i]);
            }
            out
        };
        let rest = &chords[k + 1..];
        let mut pieces = split_polygon(walk(iu, iw), rest);
        pieces.extend(split_polygon(walk(iw, iu), rest));
        return pieces;
    }
    vec![poly]
}

/// Ear-clips a convex polygon that may contain collinear vertices, never
/// emitting zero-area triangles when avoidable.
fn triangulate_convex(poly: &[usize], pos: &[Vec3], out: &mut Vec<[usize; 3]>) {
    let mut poly = poly.to_vec();
    let area = |a: usize, b: usize, c: usize| (pos[b] - pos[a]).cross(&(pos[c] - pos[a])).norm();
    let scale = poly
        .iter()
        .map(|&v| (pos[v] - pos[poly[0]]).norm_squared())
        .fold(0.0, f64::max);
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let collinear = |p: &[usize]| {
        (1..p.len().saturating_sub(1)).all(|i| area(p[0], p[i], p[i + 1]) <= eps)
            && (2..p.len()).all(|i| area(p[0], p[1], p[i]) <= eps)
    };
    while poly.len() > 3 {
        let len = poly.len();
        let mut pick = None;
        for i in 0..len {
            let (a, b, c) = (poly[(i + len - 1) % len], poly[i], poly[(i + 1) % len]);
            if area(a, b, c) <= eps {
                continue;
            }
            let mut rest = poly.clone();
            rest.remove(i);
            if !collinear(&rest) {
                pick = Some(i);
                break;
            }
            pick.get_or_insert(i);
        }
        let i = pick.unwrap_or(0);
        let len = poly.len();
        out.push([poly[(i + len - 1) % len], poly[i], poly[(i + 1) % len]]);
        poly.remove(i);
    }
    out.push([poly[0], poly[1], poly[2]]);
}
