use image::{Rgba, RgbaImage};
use proptest::prelude::*;
use surfreg::camera::{CameraModel, Pose};
use surfreg::raster::{
    decode_map, encode_map, overlay_color, overlay_map, rasterize, render_attributes, CoordinateMap,
    RenderOptions,
};
use surfreg::{TriangleMesh, Vec3};

fn small_camera() -> CameraModel {
    CameraModel::new(100.0, 64, 48).unwrap()
}

fn triangle(p: [Vec3; 3]) -> TriangleMesh {
    TriangleMesh::new(p.to_vec(), vec![[0, 1, 2]]).unwrap()
}

/// Barycentric coordinates of the point where the ray through pixel center
/// `(x, y)` meets the plane of `tri` (camera frame), by Cramer's rule.
fn ray_bary(cam: &CameraModel, tri: &[Vec3; 3], x: u32, y: u32) -> Option<[f64; 3]> {
    let dir = Vec3::new(
        (x as f64 + 0.5 - cam.cx) / cam.focal,
        (y as f64 + 0.5 - cam.cy) / cam.focal,
        1.0,
    );
    let (e1, e2) = (tri[1] - tri[0], tri[2] - tri[0]);
    let n = e1.cross(&e2);
    let s = n.dot(&tri[0]) / n.dot(&dir);
    let q = dir * s - tri[0];
    let d = n.norm_squared();
    let b1 = q.cross(&e2).dot(&n) / d;
    let b2 = e1.cross(&q).dot(&n) / d;
    let b = [1.0 - b1 - b2, b1, b2];
    b.iter().all(|&v| v > 1e-9).then_some(b)
}

#[test]
fn fronto_parallel_triangle_matches_hand_interpolation() {
    let cam = small_camera();
    let tri = [
        Vec3::new(-2.0, -1.5, 10.0),
        Vec3::new(-1.0, 2.0, 10.0),
        Vec3::new(2.5, -0.5, 10.0),
    ];
    let uv = [[0.1, 0.9], [0.8, 0.2], [0.4, 0.6]];
    let mesh = triangle(tri);
    let (map, _) =
        render_attributes(&mesh, &uv, &cam, &Pose::identity(), &RenderOptions::default()).unwrap();
    assert!(map.valid_count() > 200);
    let decoded = decode_map(&encode_map(&map).unwrap()).unwrap();
    for y in 0..cam.height {
        for x in 0..cam.width {
            match ray_bary(&cam, &tri, x, y) {
                Some(b) => {
                    let got = decoded.get(x, y).expect("interior pixel is covered");
                    for c in 0..2 {
                        let want = b[0] * uv[0][c] + b[1] * uv[1][c] + b[2] * uv[2][c];
                        assert!((got[c] - want).abs() <= 1e-4, "({x},{y}) {c}");
                    }
                }
                None => {
                    // strictly outside, or on an edge: only edge pixels may be covered
                    if map.is_valid(x, y) {
                        let b = ray_bary_loose(&cam, &tri, x, y);
                        assert!(b.iter().all(|&v| v > -1e-9), "({x},{y}) covered outside");
                    }
                }
            }
        }
    }
}

fn ray_bary_loose(cam: &CameraModel, tri: &[Vec3; 3], x: u32, y: u32) -> [f64; 3] {
    let dir = Vec3::new(
        (x as f64 + 0.5 - cam.cx) / cam.focal,
        (y as f64 + 0.5 - cam.cy) / cam.focal,
        1.0,
    );
    let (e1, e2) = (tri[1] - tri[0], tri[2] - tri[0]);
    let n = e1.cross(&e2);
    let q = dir * (n.dot(&tri[0]) / n.dot(&dir)) - tri[0];
    let d = n.norm_squared();
    let b1 = q.cross(&e2).dot(&n) / d;
    let b2 = e1.cross(&q).dot(&n) / d;
    [1.0 - b1 - b2, b1, b2]
}

#[test]
fn tilted_triangle_is_interpolated_in_perspective() {
    let cam = small_camera();
    let tri = [
        Vec3::new(-2.0, -1.5, 6.0),
        Vec3::new(-1.0, 2.0, 14.0),
        Vec3::new(2.5, -0.5, 9.0),
    ];
    let uv = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let (map, frags) = render_attributes(
        &triangle(tri),
        &uv,
        &cam,
        &Pose::identity(),
        &RenderOptions::default(),
    )
    .unwrap();
    let mut checked = 0;
    for (x, y, got) in map.valid_pixels() {
        let b = ray_bary_loose(&cam, &tri, x, y);
        assert!((got[0] - b[1]).abs() < 1e-9 && (got[1] - b[2]).abs() < 1e-9);
        let depth = frags.get(x, y).unwrap().depth;
        let want = b[0] * tri[0].z + b[1] * tri[1].z + b[2] * tri[2].z;
        assert!((depth - want).abs() < 1e-9 * want);
        assert_eq!(map.depth(x, y), Some(depth));
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn nearer_triangle_wins_regardless_of_order() {
    let cam = small_camera();
    let square = |z: f64| {
        [
            Vec3::new(-3.0 * z / 10.0, -3.0 * z / 10.0, z),
            Vec3::new(-3.0 * z / 10.0, 3.0 * z / 10.0, z),
            Vec3::new(3.0 * z / 10.0, -3.0 * z / 10.0, z),
        ]
    };
    for order in [[10.0, 20.0], [20.0, 10.0]] {
        let mut verts = square(order[0]).to_vec();
        verts.extend(square(order[1]));
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let uv: Vec<[f64; 2]> = order
            .iter()
            .flat_map(|&z| [[z / 100.0, 0.5]; 3])
            .collect();
        let (map, _) =
            render_attributes(&mesh, &uv, &cam, &Pose::identity(), &RenderOptions::default())
                .unwrap();
        assert!(map.valid_count() > 0);
        for (x, y, v) in map.valid_pixels() {
            assert!((v[0] - 0.1).abs() < 1e-12, "({x},{y})");
            assert!((map.depth(x, y).unwrap() - 10.0).abs() < 1e-9);
        }
    }
}

#[test]
fn geometry_behind_the_camera_renders_nothing() {
    let cam = small_camera();
    let tri = [
        Vec3::new(-2.0, -1.5, -10.0),
        Vec3::new(2.5, -0.5, -10.0),
        Vec3::new(-1.0, 2.0, -10.0),
    ];
    for cull in [true, false] {
        let opts = RenderOptions {
            cull_backfaces: cull,
            ..Default::default()
        };
        let (map, _) =
            render_attributes(&triangle(tri), &[[0.5; 2]; 3], &cam, &Pose::identity(), &opts)
                .unwrap();
        assert_eq!(map.valid_count(), 0);
    }
}

#[test]
fn back_faces_are_culled() {
    let cam = small_camera();
    let front = [
        Vec3::new(-2.0, -1.5, 10.0),
        Vec3::new(-1.0, 2.0, 10.0),
        Vec3::new(2.5, -0.5, 10.0),
    ];
    let back = [front[0], front[2], front[1]];
    let count = |tri, cull| {
        let opts = RenderOptions {
            cull_backfaces: cull,
            ..Default::default()
        };
        rasterize(&triangle(tri), &cam, &Pose::identity(), &opts)
            .unwrap()
            .pixels
            .iter()
            .flatten()
            .count()
    };
    let n = count(front, true);
    assert!(n > 0);
    assert_eq!(count(back, true), 0);
    assert_eq!(count(back, false), n);
}

#[test]
fn shared_edges_are_covered_exactly_once() {
    // focal 10 at depth 10 gives one unit per pixel; the square's corners and
    // its diagonal fall exactly on pixel centers
    let cam = CameraModel::new(10.0, 16, 16).unwrap();
    let c = |x: f64, y: f64| Vec3::new(x, y, 10.0);
    let (a, b, d, e) = (c(-5.5, -5.5), c(5.5, -5.5), c(5.5, 5.5), c(-5.5, 5.5));
    let halves = [[a, e, d], [a, d, b]];
    let mut hits = vec![0u32; 16 * 16];
    for tri in halves {
        let frags = rasterize(&triangle(tri), &cam, &Pose::identity(), &RenderOptions::default())
            .unwrap();
        for (i, f) in frags.pixels.iter().enumerate() {
            if f.is_some() {
                hits[i] += 1;
            }
        }
    }
    // interior centers are hit once; centers on the outer boundary at most once
    let mut covered = 0;
    for y in 0..16u32 {
        for x in 0..16u32 {
            let (px, py) = (x as f64 - 7.5, y as f64 - 7.5);
            let inside = px > -5.5 && px < 5.5 && py > -5.5 && py < 5.5;
            let h = hits[(y * 16 + x) as usize];
            assert!(h <= 1, "({x},{y}) hit {h} times");
            if inside {
                assert_eq!(h, 1, "({x},{y}) missed");
                covered += 1;
            }
        }
    }
    assert_eq!(covered, 100);
}

#[test]
fn band_height_does_not_change_the_result() {
    let cam = small_camera();
    let mesh = surfreg::shapes::icosphere(2);
    let pose = Pose::from_axis_angle(&Vec3::new(1.0, 2.0, 0.5), 0.7, Vec3::new(0.1, -0.2, 4.0));
    let uv: Vec<[f64; 2]> = mesh
        .vertices()
        .iter()
        .map(|p| [0.5 + 0.5 * p.x, 0.5 + 0.5 * p.y])
        .collect();
    let render = |band| {
        let opts = RenderOptions {
            band_rows: band,
            ..Default::default()
        };
        render_attributes(&mesh, &uv, &cam, &pose, &opts).unwrap().0
    };
    let reference = render(1);
    assert!(reference.valid_count() > 500);
    for band in [3, 16, 48, 1000] {
        assert_eq!(render(band), reference);
    }
}

#[test]
fn closed_mesh_silhouette_has_no_holes() {
    let cam = small_camera();
    let mesh = surfreg::shapes::icosphere(3);
    let pose = Pose::from_axis_angle(&Vec3::y(), 0.3, Vec3::new(0.0, 0.0, 5.0));
    let frags = rasterize(&mesh, &cam, &pose, &RenderOptions::default()).unwrap();
    // every pixel whose four neighbours are covered is covered too
    for y in 1..cam.height - 1 {
        for x in 1..cam.width - 1 {
            let cov = |x: u32, y: u32| frags.get(x, y).is_some();
            if cov(x - 1, y) && cov(x + 1, y) && cov(x, y - 1) && cov(x, y + 1) {
                assert!(cov(x, y), "hole at ({x},{y})");
            }
        }
    }
}

#[test]
fn overlay_endpoints() {
    let cam = small_camera();
    let tri = [
        Vec3::new(-2.0, -1.5, 10.0),
        Vec3::new(-1.0, 2.0, 10.0),
        Vec3::new(2.5, -0.5, 10.0),
    ];
    let (map, _) = render_attributes(
        &triangle(tri),
        &[[0.2, 0.7]; 3],
        &cam,
        &Pose::identity(),
        &RenderOptions::default(),
    )
    .unwrap();
    let bg = RgbaImage::from_pixel(cam.width, cam.height, Rgba([10, 20, 30, 255]));
    assert_eq!(overlay_map(&map, &bg, 0.0), bg);
    let full = overlay_map(&map, &bg, 1.0);
    for (x, y, px) in full.enumerate_pixels() {
        if let Some(uv) = map.get(x, y) {
            let [r, g, b] = overlay_color(uv);
            assert_eq!(px.0, [r, g, b, 255]);
        } else {
            assert_eq!(px.0, [10, 20, 30, 255]);
        }
    }
}

#[test]
fn eight_bit_png_is_not_a_coordinate_map() {
    let img = image::RgbImage::new(4, 4);
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, image::ImageFormat::Png).unwrap();
    assert!(decode_map(bytes.get_ref()).is_err());
    assert!(decode_map(b"not a png").is_err());
}

fn arb_map() -> impl Strategy<Value = CoordinateMap> {
    (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::option::weighted(0.7, (0.0f64..=1.0, 0.0f64..=1.0)), (w * h) as usize)
            .prop_map(move |cells| {
                let mut m = CoordinateMap::empty(w, h);
                for (i, c) in cells.into_iter().enumerate() {
                    if let Some((u, v)) = c {
                        m.set(i as u32 % w, i as u32 / w, [u, v]);
                    }
                }
                m
            })
    })
}

proptest! {
    #[test]
    fn codec_round_trip_is_within_one_step(map in arb_map()) {
        let bytes = encode_map(&map).unwrap();
        let back = decode_map(&bytes).unwrap();
        prop_assert_eq!((back.width(), back.height()), (map.width(), map.height()));
        for y in 0..map.height() {
            for x in 0..map.width() {
                prop_assert_eq!(back.is_valid(x, y), map.is_valid(x, y));
                if let (Some(a), Some(b)) = (map.get(x, y), back.get(x, y)) {
                    prop_assert!((a[0] - b[0]).abs() <= 1.0 / 65535.0);
                    prop_assert!((a[1] - b[1]).abs() <= 1.0 / 65535.0);
                }
            }
        }
        prop_assert_eq!(encode_map(&back).unwrap(), bytes);
    }
}
