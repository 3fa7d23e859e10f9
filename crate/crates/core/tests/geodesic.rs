//! Distance fields and surface coordinates on shapes with known geometry.

use std::f64::consts::PI;
use std::sync::Arc;
use surfreg::geodesic::{fast_march, parameterize, SurfaceParameterization};
use surfreg::mesh::{extract_region, Topology, TriangleMesh};
use surfreg::shapes::{flat_grid, icosphere, ossicle_patch};


/// Great-circle distance on the unit sphere.
fn arc(a: &surfreg::Vec3, b: &surfreg::Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn sphere_errors(n: u32) -> (f64, f64) {
    let m = icosphere(n);
    let f = fast_march(&m, &[0]).unwrap();
    let pole = m.position(0);
    let pole_err = (f.value(11) - PI).abs() / PI;
    let max_rel = (1..m.vertex_count())
        .map(|v| (f.value(v) - arc(&pole, &m.position(v))).abs() / arc(&pole, &m.position(v)))
        .fold(0.0, f64::max);
    (pole_err, max_rel)
}

fn dijkstra(m: &TriangleMesh, s: usize) -> Vec<f64> {
    let topo = Topology::new(m.vertex_count(), m.faces());
    let mut d = vec![f64::INFINITY; m.vertex_count()];
    let mut done = vec![false; m.vertex_count()];
    d[s] = 0.0;
    for _ in 0..m.vertex_count() {
        let v = (0..d.len())
            .filter(|&v| !done[v])
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .unwrap();
        done[v] = true;
        for &w in topo.neighbors(v) {
            let c = d[v] + (m.position(v) - m.position(w)).norm();
            if c < d[w] {
                d[w] = c;
            }
        }
    }
    d
}

#[test]
fn sphere_distances_converge() {
    let errs: Vec<(f64, f64)> = (3..=5).map(sphere_errors).collect();
    println!("sphere errors (pole, max) for subdiv 3..5: {errs:?}");
    assert!(errs[1].0 < 0.02 && errs[1].1 < 0.02);
    assert!(errs[0].1 > errs[1].1 && errs[1].1 > errs[2].1);
}

#[test]
fn distances_are_lipschitz_and_below_graph_distance() {
    let m = icosphere(2);
    let f = fast_march(&m, &[3]).unwrap();
    let g = dijkstra(&m, 3);
    for fc in m.faces() {
        for k in 0..3 {
            let (a, b) = (fc[k], fc[(k + 1) % 3]);
            let e = (m.position(a) - m.position(b)).norm();
            assert!((f.value(a) - f.value(b)).abs() <= e * (1.0 + 1e-9));
        }
    }
    for v in 0..m.vertex_count() {
        assert!(f.value(v) <= g[v] + 1e-12);
    }
}

#[test]
fn front_is_monotone() {
    let m = icosphere(3);
    let f = fast_march(&m, &[0]).unwrap();
    for v in 0..m.vertex_count() {
        assert!(f.causes()[v] <= f.value(v));
    }
}

#[test]
fn planar_point_source_matches_euclidean_distance() {
    let m = flat_grid(17, 13, 3.0, 2.0);
    let f = fast_march(&m, &[100]).unwrap();
    let s = m.position(100);
    for v in 0..m.vertex_count() {
        let exact = (m.position(v) - s).norm();
        assert!((f.value(v) - exact).abs() < 1e-9);
    }
}

fn sphere_param(n: u32) -> SurfaceParameterization {
    let m = Arc::new(icosphere(n));
    let all: Vec<usize> = (0..m.vertex_count()).collect();
    let region = extract_region(m, &all).unwrap();
    parameterize(&region, 0, 11).unwrap()
}

fn longitude(p: &surfreg::Vec3) -> f64 {
    p.y.atan2(p.x)
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn sphere_coordinates_follow_latitude_and_longitude() {
    let p = sphere_param(4);
    let mesh = p.region().mesh();
    for (v, uv) in p.uv().iter().enumerate() {
        assert!((0.0..=1.0).contains(&uv[0]) && (0.0..=1.0).contains(&uv[1]));
        let colat = mesh.position(v).z.clamp(-1.0, 1.0).acos() / PI;
        assert!((uv[0] - colat).abs() < 0.02, "v{v}: {} vs {colat}", uv[0]);
    }
    assert_eq!(p.uv_of_parent(0).unwrap()[0], 0.0);
    assert_eq!(p.uv_of_parent(11).unwrap()[0], 1.0);

    // equator
    let mut equator = 0;
    for (v, uv) in p.uv().iter().enumerate() {
        if mesh.position(v).z.abs() < 1e-12 {
            equator += 1;
            assert!((uv[0] - 0.5).abs() <= 0.01, "v{v}: {}", uv[0]);
        }
    }
    assert!(equator > 0);

    // antimeridian: opposite the meridian's mean longitude
    let pts = p.meridian().points();
    let mid = pts[pts.len() / 2].position;
    let anti = wrap(longitude(&mid) + PI);
    let mut count = 0;
    for (v, uv) in p.uv().iter().enumerate() {
        let q = mesh.position(v);
        if q.z.abs() < 0.9 && wrap(longitude(&q) - anti).abs() < 1e-9 {
            count += 1;
            assert!((uv[1] - 0.5).abs() <= 0.02, "v{v}: {}", uv[1]);
        }
    }
    println!("antimeridian vertices: {count}");
}

#[test]
fn latitude_increases_along_meridian() {
    let p = sphere_param(3);
    let mu = p.meridian_mu();
    assert_eq!(mu[0], 0.0);
    assert_eq!(*mu.last().unwrap(), 1.0);
    assert!(mu.windows(2).all(|w| w[1] > w[0]));
}

fn patch_param() -> SurfaceParameterization {
    let case = ossicle_patch();
    let mesh = Arc::new(case.mesh);
    let region = extract_region(mesh, &case.region).unwrap();
    parameterize(&region, case.alpha, case.beta).unwrap()
}

#[test]
fn patch_meridian_follows_symmetry_line() {
    let p = patch_param();
    for pt in p.meridian().points() {
        assert_eq!(pt.position.x, 0.0);
    }
    let mu = p.meridian_mu();
    assert!(mu.windows(2).all(|w| w[1] > w[0]));
    // along a geodesic d_α = s and d_β = L - s, so μ = s / L
    let pts = p.meridian().points();
    let total = p.meridian().length();
    let mut s = 0.0;
    for (i, pt) in pts.iter().enumerate() {
        if i > 0 {
            s += (pt.position - pts[i - 1].position).norm();
        }
        assert!((mu[i] - s / total).abs() <= 0.02, "point {i}: {} vs {}", mu[i], s / total);
    }
}

#[test]
fn patch_coordinates_are_mirror_symmetric() {
    let p = patch_param();
    let mesh = p.region().mesh();
    let alpha = mesh.position(p.alpha_local());
    let beta = mesh.position(p.beta_local());
    let mut mirror = std::collections::HashMap::new();
    for v in 0..mesh.vertex_count() {
        let q = mesh.position(v);
        mirror.insert(((q.x + 0.0).to_bits(), q.y.to_bits()), v);
    }
    let mut beyond_poles = 0;
    for (v, uv) in p.uv().iter().enumerate() {
        assert!((0.0..=1.0).contains(&uv[0]) && (0.0..=1.0).contains(&uv[1]));
        let q = mesh.position(v);
        let w = mirror[&((-q.x + 0.0).to_bits(), q.y.to_bits())];
        assert!((uv[0] - p.uv()[w][0]).abs() < 1e-9);
        if q.x != 0.0 {
            assert!((uv[1] + p.uv()[w][1] - 1.0).abs() < 1e-9, "v{v}");
        } else if q.y < alpha.y || q.y > beta.y {
            // the symmetry line beyond the poles is equidistant from both banks
            beyond_poles += 1;
            assert!((uv[1] - 0.5).abs() <= 0.01, "v{v}: {}", uv[1]);
        }
    }
    assert!(beyond_poles >= 2);
    assert_eq!(p.uv()[p.alpha_local()][0], 0.0);
    assert_eq!(p.uv()[p.beta_local()][0], 1.0);
}

#[test]
fn meridian_is_no_longer_than_edge_path() {
    for p in [sphere_param(3), patch_param()] {
        let m = p.region().mesh();
        let graph = dijkstra(m, p.alpha_local())[p.beta_local()];
        assert!(p.meridian().length() <= graph + 1e-12);
        let pts = p.meridian().points();
        assert_eq!(pts[0].position, m.position(p.alpha_local()));
        assert_eq!(pts[pts.len() - 1].position, m.position(p.beta_local()));
    }
}

#[test]
fn cut_duplicates_are_bit_exact() {
    let p = sphere_param(3);
    let c = p.chart();
    let n = p.region().vertex_count();
    assert_eq!(c.mesh.vertex_count(), n + c.inserted + c.duplicated);
    assert_eq!(c.duplicated, c.left.len() - 2);
    for (&l, &r) in c.left.iter().zip(&c.right) {
        assert_eq!(c.mesh.position(l), c.mesh.position(r));
    }
    c.mesh.check_orientation().unwrap();
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
    #[test]
    fn any_source_gives_lipschitz_field(src in 0usize..162) {
        let m = icosphere(2);
        let f = fast_march(&m, &[src]).unwrap();
        proptest::prop_assert_eq!(f.value(src), 0.0);
        for fc in m.faces() {
            for k in 0..3 {
                let (a, b) = (fc[k], fc[(k + 1) % 3]);
                let e = (m.position(a) - m.position(b)).norm();
                proptest::prop_assert!((f.value(a) - f.value(b)).abs() <= e * (1.0 + 1e-6));
            }
        }
    }
}
