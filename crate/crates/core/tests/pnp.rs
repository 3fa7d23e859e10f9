use nalgebra::{Vector2, Vector6};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use surfreg::camera::{CameraModel, Pose, DEFAULT_FOCAL};
use surfreg::datagen::{generate_scene, oracle_predict, NoiseKind, NoiseSpec, PoseSampler};
use surfreg::geodesic::parameterize;
use surfreg::mesh::extract_region;
use surfreg::metrics::{rotation_error, PoseErrorReport};
use surfreg::pnp::refine::{apply_increment, residual_and_jacobian};
use surfreg::pnp::{
    extract_correspondences, solve_pnp, solve_pnp_ransac, Correspondence, CorrespondenceSet,
    InitMethod, LookupMode, Observation, ParamIndex, PnpError, PnpOptions, RansacOptions,
};
use surfreg::shapes::ossicle_patch;
use surfreg::Vec3;

fn camera() -> CameraModel {
    CameraModel::new(800.0, 640, 480).unwrap()
}

fn random_pose(rng: &mut impl Rng) -> Pose {
    let w = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let t = Vec3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(5.0..8.0),
    );
    Pose::from_rotation_vector(&w, t)
}

fn project_all(cam: &CameraModel, pose: &Pose, pts: &[Vec3]) -> CorrespondenceSet {
    let mut set = CorrespondenceSet::new(cam.width, cam.height);
    for p in pts {
        let pixel = cam.project(pose, p).unwrap();
        set.push(Correspondence {
            pixel,
            point: *p,
            weight: 1.0,
        })
        .unwrap();
    }
    set
}

fn cube_points() -> Vec<Vec3> {
    let mut pts = Vec::new();
    for i in 0..8 {
        pts.push(Vec3::new(
            if i & 1 == 0 { -0.5 } else { 0.5 },
            if i & 2 == 0 { -0.4 } else { 0.6 },
            if i & 4 == 0 { -0.3 } else { 0.45 },
        ));
    }
    pts
}

fn translation_gap(a: &Pose, b: &Pose) -> f64 {
    (a.translation - b.translation).norm()
}

#[test]
fn eight_points_without_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cam = camera();
    for _ in 0..20 {
        let truth = random_pose(&mut rng);
        let set = project_all(&cam, &truth, &cube_points());
        let r = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
        assert_eq!(r.init, InitMethod::ControlPoints);
        assert!(rotation_error(&truth.rotation, &r.pose.rotation).unwrap() < 1e-3);
        assert!(translation_gap(&truth, &r.pose) < 1e-3);
        assert!(r.rms < 1e-6, "rms {}", r.rms);
        assert!(r.rms <= r.initial_rms);
        assert_eq!(r.inlier_ratio, 1.0);
    }
}

#[test]
fn too_few_or_degenerate_points_are_rejected() {
    let cam = camera();
    let truth = Pose::from_rotation_vector(&Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.0, 0.0, 6.0));
    let three = project_all(&cam, &truth, &cube_points()[..3]);
    assert!(matches!(
        solve_pnp(&three, &cam, &PnpOptions::default()),
        Err(PnpError::TooFewPoints { got: 3, .. })
    ));
    let line: Vec<Vec3> = (0..8).map(|i| Vec3::new(0.1, 0.2, 0.05) * i as f64).collect();
    assert!(matches!(
        solve_pnp(&project_all(&cam, &truth, &line), &cam, &PnpOptions::default()),
        Err(PnpError::Degenerate(_))
    ));
}

#[test]
fn zero_weight_points_are_ignored() {
    let cam = camera();
    let truth = Pose::from_rotation_vector(&Vec3::new(0.3, -0.2, 0.1), Vec3::new(0.1, 0.0, 6.0));
    let mut set = project_all(&cam, &truth, &cube_points());
    set.push(Correspondence {
        pixel: Vector2::new(5.0, 5.0),
        point: Vec3::new(3.0, 3.0, 3.0),
        weight: 0.0,
    })
    .unwrap();
    let r = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
    assert!(r.rms < 1e-6);
    assert_eq!(r.inliers, (0..8).collect::<Vec<_>>());
}

#[test]
fn planar_points_use_the_homography_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cam = camera();
    let grid: Vec<Vec3> = (0..36)
        .map(|i| Vec3::new((i % 6) as f64 * 0.2 - 0.5, (i / 6) as f64 * 0.2 - 0.5, 0.0))
        .collect();
    for _ in 0..20 {
        let w = Vec3::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-3.0..3.0),
        );
        let truth = Pose::from_rotation_vector(&w, Vec3::new(0.1, -0.2, rng.random_range(3.0..6.0)));
        let set = project_all(&cam, &truth, &grid);
        let r = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
        assert_eq!(r.init, InitMethod::Planar);
        assert!(rotation_error(&truth.rotation, &r.pose.rotation).unwrap() < 0.1);
        assert!(translation_gap(&truth, &r.pose) < 0.1);
    }
}

fn noisy_observations(rng: &mut impl Rng, pose: &Pose, cam: &CameraModel, n: usize) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let point = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let pixel = cam.project(pose, &point).unwrap()
                + Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            Observation { pixel, point }
        })
        .collect()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cam = camera();
    let h = 1e-6;
    for _ in 0..100 {
        let pose = random_pose(&mut rng);
        let obs = noisy_observations(&mut rng, &pose, &cam, 1)[0];
        let (_, jac) = residual_and_jacobian(&obs, &cam, &pose).unwrap();
        let scale = jac.abs().max();
        for k in 0..6 {
            let mut d = Vector6::zeros();
            d[k] = h;
            let (rp, _) = residual_and_jacobian(&obs, &cam, &apply_increment(&pose, &d)).unwrap();
            let (rm, _) = residual_and_jacobian(&obs, &cam, &apply_increment(&pose, &(-d))).unwrap();
            let fd = (rp - rm) / (2.0 * h);
            for r in 0..2 {
                let err = (fd[r] - jac[(r, k)]).abs() / scale;
                assert!(err < 1e-5, "column {k} row {r}: {err:e}");
            }
        }
    }
}

#[test]
fn refinement_never_increases_rms() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cam = camera();
    for _ in 0..20 {
        let truth = random_pose(&mut rng);
        let obs = noisy_observations(&mut rng, &truth, &cam, 40);
        let mut set = CorrespondenceSet::new(cam.width, cam.height);
        for o in &obs {
            set.push(Correspondence {
                pixel: o.pixel,
                point: o.point,
                weight: 1.0,
            })
            .unwrap();
        }
        let r = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
        assert_eq!(r.rms_history[0], r.initial_rms);
        assert!(r.rms_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.rms <= r.initial_rms);
    }
}

#[test]
fn solution_follows_a_rigid_motion_of_the_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cam = camera();
    for _ in 0..10 {
        let truth = random_pose(&mut rng);
        let pts = cube_points();
        let set = project_all(&cam, &truth, &pts);
        let r = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
        let m = Pose::from_rotation_vector(
            &Vec3::new(rng.random_range(-2.0..2.0), 0.4, -0.3),
            Vec3::new(1.0, -2.0, 0.5),
        );
        let moved: Vec<Vec3> = pts.iter().map(|p| m.transform_point(p)).collect();
        let mut set2 = CorrespondenceSet::new(cam.width, cam.height);
        for (c, q) in set.items().iter().zip(&moved) {
            set2.push(Correspondence { point: *q, ..*c }).unwrap();
        }
        let r2 = solve_pnp(&set2, &cam, &PnpOptions::default()).unwrap();
        let back = r2.pose.compose(&m);
        assert!(rotation_error(&back.rotation, &r.pose.rotation).unwrap() < 1e-6);
        assert!(translation_gap(&back, &r.pose) < 1e-6);
    }
}

fn patch_setup() -> (surfreg::SurfaceParameterization, CameraModel) {
    let case = ossicle_patch();
    let region = extract_region(Arc::new(case.mesh), &case.region).unwrap();
    let param = parameterize(&region, case.alpha, case.beta).unwrap();
    (param, CameraModel::new(DEFAULT_FOCAL, 1920, 1080).unwrap())
}

#[test]
fn consensus_survives_thirty_percent_outliers() {
    let (param, cam) = patch_setup();
    let index = ParamIndex::new(&param, LookupMode::Nearest);
    let scene = generate_scene(&param, &cam, &PoseSampler::default(), 5, 11, 10).unwrap();
    let noise = [NoiseSpec::new(NoiseKind::Outlier, 0.3).unwrap()];
    for s in &scene {
        let map = oracle_predict(&s.map, &noise, s.seed);
        let corr = extract_correspondences(&map, &index);
        let r = solve_pnp_ransac(&corr, &cam, &RansacOptions::default()).unwrap();
        let e = PoseErrorReport::compare("s", &s.pose, &r.pose, cam.focal).unwrap();
        assert!(e.rot_deg < 1.0, "{e:?}");
        assert!((r.pose.translation - s.pose.translation).norm() < 1.0, "{e:?}");
        assert!(r.inlier_ratio > 0.6 && r.inlier_ratio < 0.8, "{}", r.inlier_ratio);
    }
}

#[test]
fn consensus_on_clean_data_agrees_with_the_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cam = camera();
    let truth = random_pose(&mut rng);
    let pts: Vec<Vec3> = (0..30)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let set = project_all(&cam, &truth, &pts);
    let direct = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
    let robust = solve_pnp_ransac(&set, &cam, &RansacOptions::default()).unwrap();
    assert_eq!(robust.inlier_ratio, 1.0);
    assert_eq!(robust.inliers.len(), 30);
    assert!(rotation_error(&direct.pose.rotation, &robust.pose.rotation).unwrap() < 1e-7);
    assert!(translation_gap(&direct.pose, &robust.pose) < 1e-9);
}

#[test]
fn all_outliers_give_no_consensus() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cam = camera();
    let mut set = CorrespondenceSet::new(cam.width, cam.height);
    for _ in 0..200 {
        set.push(Correspondence {
            pixel: Vector2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
            point: Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            weight: 1.0,
        })
        .unwrap();
    }
    let opts = RansacOptions {
        inlier_threshold_px: 2.0,
        ..Default::default()
    };
    assert!(matches!(
        solve_pnp_ransac(&set, &cam, &opts),
        Err(PnpError::NoConsensus { .. })
    ));
}

#[test]
fn solvers_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cam = camera();
    let truth = random_pose(&mut rng);
    let obs = noisy_observations(&mut rng, &truth, &cam, 60);
    let mut set = CorrespondenceSet::new(cam.width, cam.height);
    for (i, o) in obs.iter().enumerate() {
        let pixel = if i % 4 == 0 { Vector2::new(300.0, 200.0) } else { o.pixel };
        set.push(Correspondence { pixel, point: o.point, weight: 1.0 }).unwrap();
    }
    let opts = RansacOptions {
        seed: 42,
        ..Default::default()
    };
    assert_eq!(
        solve_pnp_ransac(&set, &cam, &opts).unwrap(),
        solve_pnp_ransac(&set, &cam, &opts).unwrap()
    );
    assert_eq!(
        solve_pnp(&set, &cam, &PnpOptions::default()).unwrap(),
        solve_pnp(&set, &cam, &PnpOptions::default()).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn noiseless_cube_is_recovered(
        w in prop::array::uniform3(-3.0f64..3.0),
        tx in -0.5f64..0.5,
        ty in -0.5f64..0.5,
        tz in 4.0f64..10.0,
    ) {
        let cam = camera();
        let truth = Pose::from_rotation_vector(&Vec3::from(w), Vec3::new(tx, ty, tz));
        let set = project_all(&cam, &truth, &cube_points());
        let r = solve_pnp(&set, &cam, &PnpOptions::default()).unwrap();
        prop_assert!(rotation_error(&truth.rotation, &r.pose.rotation).unwrap() < 1e-3);
        prop_assert!(translation_gap(&truth, &r.pose) < 1e-3);
    }
}
