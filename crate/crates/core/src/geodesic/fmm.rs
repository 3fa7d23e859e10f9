//! Fast marching on triangulated surfaces.
//!
//! With a single source, triangles are updated as a circular front around a
//! virtual source point (exact for point sources in the plane). With several
//! sources the classic planar two-point update is used, which is exact for
//! line-like fronts such as the distance to a cut. Obtuse angles at the updated vertex
//! are handled by unfolding neighbouring triangles into the plane until a
//! vertex falls inside the angle; if that fails the edge (Dijkstra) update
//! alone applies.

use super::{DistanceField, GeodesicError};
use crate::mesh::{Topology, TriangleMesh};
use crate::Vec3;
use nalgebra::Vector2;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

type P2 = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmmOptions {
    /// Maximum number of triangles unfolded when looking for a virtual
    /// support vertex at an obtuse angle.
    pub max_unfold: usize,
}

impl Default for FmmOptions {
    fn default() -> Self {
        Self { max_unfold: 8 }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Far,
    Trial,
    Accepted,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Geodesic distance from `sources` to every vertex of `mesh`.
pub fn fast_march(mesh: &TriangleMesh, sources: &[usize]) -> Result<DistanceField, GeodesicError> {
    let topo = Topology::new(mesh.vertex_count(), mesh.faces());
    fast_march_with(mesh, &topo, sources, &FmmOptions::default())
}

pub fn fast_march_with(
    mesh: &TriangleMesh,
    topo: &Topology,
    sources: &[usize],
    opts: &FmmOptions,
) -> Result<DistanceField, GeodesicError> {
    if sources.is_empty() {
        return Err(GeodesicError::EmptySources);
    }
    let n = mesh.vertex_count();
    if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
        return Err(GeodesicError::SourceOutOfRange { vertex: bad, count: n });
    }
    let pos = mesh.vertices();
    let faces = mesh.faces();
    let mut dist = vec![f64::INFINITY; n];
    let mut cause = vec![0.0; n];
    let mut state = vec![State::Far; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        state[s] = State::Trial;
        heap.push(Entry(0.0, s));
    }
    // virtual-source update is exact only for a single point source
    let circular = sources.len() == 1;
    while let Some(Entry(d, v)) = heap.pop() {
        if state[v] == State::Accepted || d > dist[v] {
            continue;
        }
        state[v] = State::Accepted;
        for &f in topo.vertex_faces(v) {
            let face = faces[f];
            for &c in &face {
                if c == v || state[c] == State::Accepted {
                    continue;
                }
                let w = crate::mesh::topology::third_vertex(&face, v, c);
                let mut best = dist[v] + (pos[c] - pos[v]).norm();
                if state[w] == State::Accepted {
                    let frame = FaceFrame::new(pos[v], pos[w], pos[c]);
                    let known_v = Known { p: frame.a, d: dist[v] };
                    let known_w = Known { p: frame.b, d: dist[w] };
                    if let Some(t) = segment_update(known_v, known_w, frame.c, circular) {
                        best = best.min(t);
                    }
                    if frame.obtuse_at_c() {
                        let support = unfold_support(mesh, topo, f, v, w, &frame, opts.max_unfold);
                        if let Some((u, pu)) = support {
                            if state[u] == State::Accepted {
                                let known_u = Known { p: pu, d: dist[u] };
                                for (k1, k2) in [(known_v, known_u), (known_u, known_w)] {
                                    if let Some(t) = segment_update(k1, k2, frame.c, circular) {
                                        best = best.min(t);
                                    }
                                }
                            }
                        }
                    }
                }
                if best < dist[c] {
                    dist[c] = best;
                    cause[c] = dist[v];
                    state[c] = State::Trial;
                    heap.push(Entry(best, c));
                }
            }
        }
    }
    if let Some(v) = dist.iter().position(|d| !d.is_finite()) {
        return Err(GeodesicError::Unreachable { vertex: v });
    }
    let mut sorted = sources.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(DistanceField::new(dist, sorted, cause))
}

#[derive(Clone, Copy)]
struct Known {
    p: P2,
    d: f64,
}

/// A triangle (a, b, c) laid out in the plane with a at the origin, b on +x
/// and c in the upper half plane.
struct FaceFrame {
    a: P2,
    b: P2,
    c: P2,
}

impl FaceFrame {
    fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        let lab = (b - a).norm();
        let lac = (c - a).norm();
        let lbc = (c - b).norm();
        let cx = (lac * lac - lbc * lbc + lab * lab) / (2.0 * lab);
        let cy = (lac * lac - cx * cx).max(0.0).sqrt();
        Self {
            a: P2::zeros(),
            b: P2::new(lab, 0.0),
            c: P2::new(cx, cy),
        }
    }

    fn obtuse_at_c(&self) -> bool {
        (self.a - self.c).dot(&(self.b - self.c)) < 0.0
    }
}

fn cross2(a: P2, b: P2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Places the point at distances `dp`, `dq` from `p`, `q` on the side of line
/// pq opposite to `away`.
fn place_opposite(p: P2, q: P2, dp: f64, dq: f64, away: P2) -> Option<P2> {
    let e = q - p;
    let l = e.norm();
    if l <= 0.0 {
        return None;
    }
    let ex = e / l;
    let mut ey = P2::new(-ex.y, ex.x);
    if (away - p).dot(&ey) > 0.0 {
        ey = -ey;
    }
    let x = (dp * dp - dq * dq + l * l) / (2.0 * l);
    let y = (dp * dp - x * x).max(0.0).sqrt();
    Some(p + ex * x + ey * y)
}

/// Unfolds triangles across edge (a, b) of `face` until a vertex lands inside
/// the angle at c. Returns that vertex and its unfolded position.
fn unfold_support(
    mesh: &TriangleMesh,
    topo: &Topology,
    face: usize,
    a: usize,
    b: usize,
    frame: &FaceFrame,
    max_unfold: usize,
) -> Option<(usize, P2)> {
    let pos = mesh.vertices();
    let ca = frame.a - frame.c;
    let cb = frame.b - frame.c;
    let orient = cross2(ca, cb).signum();
    let (mut p, mut q) = ((a, frame.a), (b, frame.b));
    let mut away = frame.c;
    let mut current = face;
    for _ in 0..max_unfold {
        let next = topo.opposite_face(p.0, q.0, current)?;
        let u = crate::mesh::topology::third_vertex(&mesh.faces()[next], p.0, q.0);
        let pu = place_opposite(
            p.1,
            q.1,
            (pos[u] - pos[p.0]).norm(),
            (pos[u] - pos[q.0]).norm(),
            away,
        )?;
        let cu = pu - frame.c;
        let side_a = cross2(ca, cu) * orient;
        let side_b = cross2(cu, cb) * orient;
        if side_a >= 0.0 && side_b >= 0.0 {
            return Some((u, pu));
        }
        if side_a < 0.0 {
            // outside on a's side: continue through edge (u, q)
            away = p.1;
            p = (u, pu);
        } else {
            away = q.1;
            q = (u, pu);
        }
        current = next;
    }
    None
}

/// Two-point update of the value at `c` from known values at `k1`, `k2`.
fn segment_update(k1: Known, k2: Known, c: P2, circular: bool) -> Option<f64> {
    let e = k2.p - k1.p;
    let l = e.norm();
    if l <= 0.0 {
        return None;
    }
    let ex = e / l;
    let rel = c - k1.p;
    // c is placed on the positive side of the edge
    let cy = rel.dot(&P2::new(-ex.y, ex.x)).abs();
    if cy <= 0.0 {
        return None;
    }
    let cx = rel.dot(&ex);
    let tol = 1e-12 * l;
    let floor = k1.d.max(k2.d);
    let t = if circular {
        // circular front from a virtual source below the edge
        let xs = (k1.d * k1.d - k2.d * k2.d + l * l) / (2.0 * l);
        let h2 = k1.d * k1.d - xs * xs;
        if h2 < -tol * l {
            return None;
        }
        let ys = -h2.max(0.0).sqrt();
        let x0 = xs + (-ys) * (cx - xs) / (cy - ys);
        if x0 < -tol || x0 > l + tol {
            return None;
        }
        ((cx - xs).powi(2) + (cy - ys).powi(2)).sqrt()
    } else {
        let nx = (k2.d - k1.d) / l;
        if nx.abs() >= 1.0 {
            return None;
        }
        let ny = (1.0 - nx * nx).sqrt();
        let x0 = cx - nx * cy / ny;
        if x0 < -tol || x0 > l + tol {
            return None;
        }
        k1.d + nx * cx + ny * cy
    };
    if !t.is_finite() || t < floor {
        return None;
    }
    Some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{flat_grid, icosphere, unit_square};

    #[test]
    fn source_is_zero() {
        let m = icosphere(2);
        let f = fast_march(&m, &[5]).unwrap();
        assert_eq!(f.value(5), 0.0);
    }

    #[test]
    fn square_diagonal_is_exact() {
        let f = fast_march(&unit_square(), &[0]).unwrap();
        assert!((f.value(2) - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn planar_point_source_is_exact_on_grid() {
        let m = flat_grid(21, 21, 2.0, 2.0);
        let f = fast_march(&m, &[0]).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            let exact = (p.x * p.x + p.y * p.y).sqrt();
            assert!((f.value(v) - exact).abs() < 1e-9 * (1.0 + exact), "v{v}");
        }
    }

    #[test]
    fn planar_line_source_is_exact_on_grid() {
        let m = flat_grid(11, 11, 1.0, 1.0);
        let bottom: Vec<usize> = (0..11).collect();
        let f = fast_march(&m, &bottom).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            assert!((f.value(v) - p.y).abs() < 1e-9, "v{v}: {} vs {}", f.value(v), p.y);
        }
    }

    #[test]
    fn disconnected_vertex_is_reported() {
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(5.0, 5.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            fast_march(&m, &[0]),
            Err(GeodesicError::Unreachable { vertex: 3 })
        ));
        assert!(matches!(fast_march(&m, &[]), Err(GeodesicError::EmptySources)));
    }

    #[test]
    fn obtuse_fan_uses_unfolding() {
        // strip of obtuse triangles along x; the source sits off to the side
        let mut verts = Vec::new();
        for i in 0..12 {
            verts.push(Vec3::new(i as f64, 0.0, 0.0));
            verts.push(Vec3::new(i as f64 + 0.5, 0.15, 0.0));
        }
        let mut faces = Vec::new();
        for i in 0..11 {
            let (a, b, c, d) = (2 * i, 2 * i + 2, 2 * i + 3, 2 * i + 1);
            faces.push([a, b, d]);
            faces.push([b, c, d]);
        }
        let m = TriangleMesh::new(verts, faces).unwrap();
        let f = fast_march(&m, &[0]).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            let exact = p.norm();
            assert!(f.value(v) >= exact - 1e-9);
            assert!(f.value(v) <= exact * 1.01 + 1e-9, "v{v}: {} vs {exact}", f.value(v));
        }
    }
}
