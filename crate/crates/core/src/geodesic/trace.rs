//! Steepest-descent tracing of the prime meridian on a distance field.

use super::{DistanceField, GeodesicError, GeodesicPath, SurfacePoint};
use crate::mesh::topology::third_vertex;
use crate::mesh::{Topology, TriangleMesh};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Edge crossings closer than this fraction of the edge to an endpoint
    /// are snapped onto the endpoint.
    pub snap: f64,
    /// Leaving a vertex through a face requires a descent rate this much
    /// (relatively) steeper than the best edge; otherwise the edge is taken.
    pub edge_bias: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            snap: 1e-2,
            edge_bias: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Loc {
    Vertex(usize),
    /// `(1 - t) * a + t * b`, entered from `from`.
    Edge {
        a: usize,
        b: usize,
        t: f64,
        from: usize,
    },
}

pub fn trace_meridian(
    mesh: &TriangleMesh,
    field_from_beta: &DistanceField,
    alpha: usize,
) -> Result<GeodesicPath, GeodesicError> {
    let topo = Topology::new(mesh.vertex_count(), mesh.faces());
    trace_meridian_with(mesh, &topo, field_from_beta, alpha, &TraceOptions::default())
}

/// Descends the distance-from-β field starting at α, crossing faces along the
/// negative gradient of the piecewise-linear interpolant. When the descent
/// direction leaves a face through the edge it entered by (a valley along an
/// edge) or no face direction descends, the path steps along an edge to a
/// lower vertex instead. The final step into a face incident to β goes
/// straight to β, so both endpoints are exact vertex positions.
pub fn trace_meridian_with(
    mesh: &TriangleMesh,
    topo: &Topology,
    field_from_beta: &DistanceField,
    alpha: usize,
    opts: &TraceOptions,
) -> Result<GeodesicPath, GeodesicError> {
    let sources = field_from_beta.sources();
    if sources.len() != 1 {
        return Err(GeodesicError::MultipleSources(sources.len()));
    }
    let beta = sources[0];
    if alpha == beta {
        return Err(GeodesicError::SamePoles(alpha));
    }
    if alpha >= mesh.vertex_count() {
        return Err(GeodesicError::PoleOutsideRegion(alpha));
    }
    let pos = mesh.vertices();
    let faces = mesh.faces();
    let field = field_from_beta.values();
    let value_at = |loc: &Loc| match *loc {
        Loc::Vertex(v) => field[v],
        Loc::Edge { a, b, t, .. } => (1.0 - t) * field[a] + t * field[b],
    };
    let position = |loc: &Loc| match *loc {
        Loc::Vertex(v) => pos[v],
        Loc::Edge { a, b, t, .. } => pos[a] * (1.0 - t) + pos[b] * t,
    };
    let snap_edge = |a: usize, b: usize, t: f64, from: usize| {
        if t <= opts.snap {
            Loc::Vertex(a)
        } else if t >= 1.0 - opts.snap {
            Loc::Vertex(b)
        } else {
            Loc::Edge { a, b, t, from }
        }
    };
    let edge_face = |a: usize, b: usize| topo.edge_faces(a, b)[0];

    let max_steps = 4 * (mesh.vertex_count() + mesh.face_count());
    let mut locs = vec![Loc::Vertex(alpha)];
    let mut seg_faces = Vec::new();
    let mut cur = Loc::Vertex(alpha);
    let fail = |loc: &Loc, steps: usize| {
        let p = position(loc);
        GeodesicError::TraceFailed {
            steps,
            last: [p.x, p.y, p.z],
        }
    };
    for step in 0..=max_steps {
        if step == max_steps {
            return Err(fail(&cur, step));
        }
        let (next, face) = match cur {
            Loc::Vertex(v) => {
                if topo.neighbors(v).contains(&beta) {
                    (Loc::Vertex(beta), edge_face(v, beta))
                } else {
                    descend_from_vertex(mesh, topo, field, v, opts.edge_bias, &snap_edge)
                        .ok_or_else(|| fail(&cur, step))?
                }
            }
            Loc::Edge { a, b, t, from } => match topo.opposite_face(a, b, from) {
                Some(g) if third_vertex(&faces[g], a, b) == beta => (Loc::Vertex(beta), g),
                Some(g) => match cross_face(pos, &faces[g], field, a, b, t) {
                    Some((p, q, s)) => (snap_edge(p, q, s, g), g),
                    None => (lower_end(field, a, b), g),
                },
                None => (lower_end(field, a, b), from),
            },
        };
        if value_at(&next) >= value_at(&cur) {
            return Err(fail(&cur, step));
        }
        locs.push(next);
        seg_faces.push(face);
        cur = next;
        if matches!(cur, Loc::Vertex(v) if v == beta) {
            break;
        }
    }

    let last_face = *seg_faces.last().expect("at least one segment");
    let points = locs
        .iter()
        .enumerate()
        .map(|(i, loc)| {
            let face = seg_faces.get(i).copied().unwrap_or(last_face);
            let f = faces[face];
            let mut bary = [0.0; 3];
            match *loc {
                Loc::Vertex(v) => {
                    bary[f.iter().position(|&x| x == v).expect("vertex in face")] = 1.0;
                }
                Loc::Edge { a, b, t, .. } => {
                    bary[f.iter().position(|&x| x == a).expect("edge in face")] = 1.0 - t;
                    bary[f.iter().position(|&x| x == b).expect("edge in face")] = t;
                }
            }
            SurfacePoint::at(mesh, face, bary)
        })
        .collect();
    Ok(GeodesicPath::new(points))
}

fn lower_end(field: &[f64], a: usize, b: usize) -> Loc {
    if field[a] <= field[b] {
        Loc::Vertex(a)
    } else {
        Loc::Vertex(b)
    }
}

/// Gradient of the linear interpolant of `field` over face `f`.
fn face_gradient(pos: &[Vec3], f: &[usize; 3], field: &[f64]) -> Vec3 {
    let [p0, p1, p2] = f.map(|v| pos[v]);
    let n = (p1 - p0).cross(&(p2 - p0));
    let n2 = n.norm_squared();
    if n2 <= 0.0 {
        return Vec3::zeros();
    }
    let g = n.cross(&(p2 - p1)) * field[f[0]]
        + n.cross(&(p0 - p2)) * field[f[1]]
        + n.cross(&(p1 - p0)) * field[f[2]];
    g / n2
}

/// Coefficients (x, y) with `d = x * e1 + y * e2`.
fn decompose(d: &Vec3, e1: &Vec3, e2: &Vec3) -> Option<(f64, f64)> {
    let (a11, a12, a22) = (e1.dot(e1), e1.dot(e2), e2.dot(e2));
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-300 {
        return None;
    }
    let (r1, r2) = (d.dot(e1), d.dot(e2));
    Some(((a22 * r1 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det))
}

fn descend_from_vertex(
    mesh: &TriangleMesh,
    topo: &Topology,
    field: &[f64],
    v: usize,
    edge_bias: f64,
    snap_edge: &dyn Fn(usize, usize, f64, usize) -> Loc,
) -> Option<(Loc, usize)> {
    let pos = mesh.vertices();
    let mut best: Option<(f64, Loc, usize)> = None;
    let mut edge_rate = 0.0f64;
    for &n in topo.neighbors(v) {
        if field[n] < field[v] {
            let rate = (field[v] - field[n]) / (pos[n] - pos[v]).norm();
            edge_rate = edge_rate.max(rate);
            if best.as_ref().is_none_or(|b| rate > b.0) {
                best = Some((rate, Loc::Vertex(n), topo.edge_faces(v, n)[0]));
            }
        }
    }
    for &fi in topo.vertex_faces(v) {
        let f = mesh.faces()[fi];
        let g = face_gradient(pos, &f, field);
        let rate = g.norm();
        if rate <= 0.0 {
            continue;
        }
        let k = f.iter().position(|&x| x == v).expect("vertex in face");
        let (a, b) = (f[(k + 1) % 3], f[(k + 2) % 3]);
        let d = -g;
        let Some((x, y)) = decompose(&d, &(pos[a] - pos[v]), &(pos[b] - pos[v])) else {
            continue;
        };
        if x < 0.0 || y < 0.0 || x + y <= 0.0 {
            continue;
        }
        if rate <= edge_rate * (1.0 + edge_bias) {
            continue;
        }
        if best.as_ref().is_none_or(|bst| rate > bst.0) {
            let t = y / (x + y);
            best = Some((rate, snap_edge(a, b, t, fi), fi));
        }
    }
    best.map(|(_, loc, f)| (loc, f))
}

/// Follows the descent direction of face `g` from the point on edge (a, b).
/// Returns the exit edge (p, q) and parameter, or `None` if the direction
/// does not enter `g`.
fn cross_face(
    pos: &[Vec3],
    g: &[usize; 3],
    field: &[f64],
    a: usize,
    b: usize,
    t: f64,
) -> Option<(usize, usize, f64)> {
    let c = third_vertex(g, a, b);
    let d = -face_gradient(pos, g, field);
    let (db, dc) = decompose(&d, &(pos[b] - pos[a]), &(pos[c] - pos[a]))?;
    let da = -db - dc;
    if dc <= 1e-12 * (da.abs() + db.abs() + dc.abs()) {
        return None;
    }
    let (wa, wb) = (1.0 - t, t);
    let sa = if da < 0.0 { -wa / da } else { f64::INFINITY };
    let sb = if db < 0.0 { -wb / db } else { f64::INFINITY };
    if sa <= sb {
        // a-weight hits zero: exit through edge (b, c)
        let (wb2, wc2) = (wb + sa * db, sa * dc);
        Some((b, c, wc2 / (wb2 + wc2)))
    } else {
        let (wa2, wc2) = (wa + sb * da, sb * dc);
        Some((a, c, wc2 / (wa2 + wc2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::fast_march;
    use crate::shapes::{flat_grid, icosphere};

    #[test]
    fn adjacent_poles_give_the_edge() {
        let m = flat_grid(5, 5, 1.0, 1.0);
        let f = fast_march(&m, &[7]).unwrap();
        let path = trace_meridian(&m, &f, 6).unwrap();
        assert_eq!(path.len(), 2);
        assert!((path.length() - 0.25).abs() < 1e-9);
        assert_eq!(path.points()[0].position, m.position(6));
        assert_eq!(path.points()[1].position, m.position(7));
    }

    #[test]
    fn same_pole_is_rejected() {
        let m = icosphere(1);
        let f = fast_march(&m, &[0]).unwrap();
        assert!(matches!(
            trace_meridian(&m, &f, 0),
            Err(GeodesicError::SamePoles(0))
        ));
    }

    #[test]
    fn flat_diagonal_is_straight() {
        let m = flat_grid(9, 9, 1.0, 1.0);
        let f = fast_march(&m, &[80]).unwrap();
        let path = trace_meridian(&m, &f, 2).unwrap();
        let exact = (m.position(80) - m.position(2)).norm();
        assert!((path.length() - exact).abs() < 1e-2 * exact, "{}", path.length());
    }
}
