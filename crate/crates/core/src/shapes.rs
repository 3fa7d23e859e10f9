//! Procedural test surfaces.

use crate::mesh::TriangleMesh;
use crate::Vec3;
use std::collections::HashMap;

/// Unit icosphere with vertices at the poles (0, 0, ±1).
///
/// Vertex 0 is the north pole, vertex 11 the south pole; subdivision keeps the
/// original icosahedron vertices and appends edge midpoints projected onto the
/// sphere, so `10 * 4^n + 2` vertices result. Faces are wound outward.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let mut verts = Vec::with_capacity(12);
    verts.push(Vec3::new(0.0, 0.0, 1.0));
    let z = 1.0 / 5f64.sqrt();
    let r = 2.0 / 5f64.sqrt();
    for k in 0..5 {
        let a = (72.0 * k as f64).to_radians();
        verts.push(Vec3::new(r * a.cos(), r * a.sin(), z));
    }
    for k in 0..5 {
        let a = (72.0 * k as f64 + 36.0).to_radians();
        verts.push(Vec3::new(r * a.cos(), r * a.sin(), -z));
    }
    verts.push(Vec3::new(0.0, 0.0, -1.0));
    let up = |k: usize| 1 + k % 5;
    let lo = |k: usize| 6 + k % 5;
    let mut faces = Vec::with_capacity(20);
    for k in 0..5 {
        faces.push([0, up(k), up(k + 1)]);
        faces.push([up(k), lo(k), up(k + 1)]);
        faces.push([up(k + 1), lo(k), lo(k + 1)]);
        faces.push([11, lo(k + 1), lo(k)]);
    }
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let faces = faces
        .into_iter()
        .map(|f| {
            let n = (verts[f[1]] - verts[f[0]]).cross(&(verts[f[2]] - verts[f[0]]));
            if n.dot(&verts[f[0]]) < 0.0 {
                [f[0], f[2], f[1]]
            } else {
                f
            }
        })
        .collect();
    TriangleMesh::new(verts, faces).expect("icosphere construction is valid")
}

/// The unit square split along the (0,0)-(1,1) diagonal.
pub fn unit_square() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("valid square")
}

/// Flat grid over `[0, w] x [0, h]` in the z = 0 plane, faces facing +z.
pub fn flat_grid(nx: usize, ny: usize, w: f64, h: f64) -> TriangleMesh {
    height_field(nx, ny, (0.0, w), (0.0, h), |_, _| 0.0)
}

/// A synthetic stand-in for an anatomical surface patch plus the region and
/// pole choice used to parameterize it.
#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub mesh: TriangleMesh,
    pub region: Vec<usize>,
    pub alpha: usize,
    pub beta: usize,
}

/// An elongated, mirror-symmetric (in x) ridge a few millimeters across.
///
/// The height depends on x alone plus a constant slope in y, so the surface
/// is developable and the symmetry line x = 0 is the unique shortest path
/// between any two of its points. The grid is triangulated symmetrically
/// about x = 0, so the traced meridian stays on that line. The region is the lens-shaped
/// footprint `|x| <= 2 (1 - y²/2.6²)`, pointed at both ends; the poles sit on
/// the symmetry line one grid row in from the tips. Points beyond a pole are
/// equidistant from both sides of the meridian, so the sharp tips keep that
/// part of the region small.
pub fn ossicle_patch() -> SyntheticCase {
    let (nx, ny) = (177, 225);
    let (x0, x1) = (-2.2, 2.2);
    let (y0, y1) = (-2.8, 2.8);
    let mesh = height_field(nx, ny, (x0, x1), (y0, y1), |x, y| {
        1.5 * (-(x * x) / (1.1 * 1.1)).exp() + 0.12 * y
    });
    let index = |i: usize, j: usize| j * nx + i;
    // vertices of the faces whose centroid (in x, y) lies inside the lens
    let mut region: Vec<usize> = mesh
        .faces()
        .iter()
        .filter(|f| {
            let c = f.iter().fold(Vec3::zeros(), |acc, &v| acc + mesh.position(v)) / 3.0;
            c.x.abs() <= 2.0 * (1.0 - (c.y / 2.6).powi(2))
        })
        .flatten()
        .copied()
        .collect();
    region.sort_unstable();
    region.dedup();
    let mid: Vec<usize> = (0..ny)
        .map(|j| index(nx / 2, j))
        .filter(|v| region.binary_search(v).is_ok())
        .collect();
    SyntheticCase {
        mesh,
        region,
        alpha: mid[1],
        beta: mid[mid.len() - 2],
    }
}

/// Grid height field `z = f(x, y)`, triangulated mirror-symmetrically about
/// the grid's middle column.
pub fn height_field(
    nx: usize,
    ny: usize,
    xr: (f64, f64),
    yr: (f64, f64),
    f: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut verts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = yr.0 + (yr.1 - yr.0) * j as f64 / (ny - 1) as f64;
        for i in 0..nx {
            // exactly mirror-symmetric about the middle of the range
            let s = (2 * i) as f64 - (nx - 1) as f64;
            let x = 0.5 * (xr.0 + xr.1) + 0.5 * (xr.1 - xr.0) * s / (nx - 1) as f64;
            verts.push(Vec3::new(x, y, f(x, y)));
        }
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if 2 * i + 1 < nx - 1 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    TriangleMesh::new(verts, faces).expect("valid grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_poles() {
        for n in 0..4 {
            let m = icosphere(n);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(n) + 2);
            assert_eq!(m.face_count(), 20 * 4usize.pow(n));
            assert_eq!(m.position(0), Vec3::z());
            assert_eq!(m.position(11), -Vec3::z());
            m.check_orientation().unwrap();
        }
    }

    #[test]
    fn patch_is_mirror_symmetric() {
        let case = ossicle_patch();
        let m = &case.mesh;
        m.check_orientation().unwrap();
        let nx = 177;
        for (v, p) in m.vertices().iter().enumerate() {
            let (i, j) = (v % nx, v / nx);
            let q = m.position(j * nx + (nx - 1 - i));
            assert!((p.x + q.x).abs() < 1e-12 && (p.z - q.z).abs() < 1e-12);
        }
        assert!(m.position(case.alpha).x.abs() < 1e-12);
        assert!(case.region.contains(&case.alpha) && case.region.contains(&case.beta));
    }
}
