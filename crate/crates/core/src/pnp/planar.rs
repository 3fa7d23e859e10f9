//! Homography initialization for (nearly) planar point sets.

use super::{point_spread, Observation, PnpError};
use crate::camera::{CameraModel, Pose};
use crate::Vec3;
use nalgebra::{Matrix3, SMatrix, SymmetricEigen, Vector2};

/// Translates and scales points so their centroid is at the origin and their
/// mean distance from it is √2. Returns the normalizing transform.
fn normalizer(pts: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mean = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean > 0.0 { 2f64.sqrt() / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn apply(h: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let q = h * Vec3::new(p.x, p.y, 1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Homography `H` with `dst ~ H src` by normalized DLT.
pub(crate) fn fit_homography(src: &[Vector2<f64>], dst: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    let (ns, nd) = (normalizer(src), normalizer(dst));
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (s, d) in src.iter().zip(dst) {
        let (s, d) = (apply(&ns, s), apply(&nd, d));
        let r1 = [s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y, -d.x];
        let r2 = [0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y, -d.y];
        for p in 0..9 {
            for q in 0..9 {
                ata[(p, q)] += r1[p] * r1[q] + r2[p] * r2[q];
            }
        }
    }
    let eig = SymmetricEigen::new(ata);
    let k = (0..9).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))?;
    let h = eig.eigenvectors.column(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    Some(nd.try_inverse()? * hn * ns)
}

pub(crate) fn homography_pose(obs: &[Observation], camera: &CameraModel) -> Result<Pose, PnpError> {
    let (c, eig) = point_spread(obs);
    let e1: Vec3 = eig.eigenvectors.column(2).into_owned();
    let e2: Vec3 = eig.eigenvectors.column(1).into_owned();
    let e3 = e1.cross(&e2);
    // world -> plane frame
    let w_rot = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
    let to_plane = Pose {
        rotation: w_rot,
        translation: -(w_rot * c),
    };
    let src: Vec<Vector2<f64>> = obs
        .iter()
        .map(|o| {
            let p = to_plane.transform_point(&o.point);
            Vector2::new(p.x, p.y)
        })
        .collect();
    let dst: Vec<Vector2<f64>> = obs
        .iter()
        .map(|o| {
            Vector2::new(
                (o.pixel.x - camera.cx) / camera.focal,
                (o.pixel.y - camera.cy) / camera.focal,
            )
        })
        .collect();
    let h = fit_homography(&src, &dst)
        .ok_or_else(|| PnpError::Degenerate("homography fit failed".into()))?;
    let (h1, h2, h3): (Vec3, Vec3, Vec3) = (
        h.column(0).into_owned(),
        h.column(1).into_owned(),
        h.column(2).into_owned(),
    );
    let norm = 0.5 * (h1.norm() + h2.norm());
    if !(norm > 0.0) {
        return Err(PnpError::Degenerate("homography has a null column".into()));
    }
    let mut scale = 1.0 / norm;
    if h3.z * scale < 0.0 {
        scale = -scale;
    }
    let (r1, r2) = (h1 * scale, h2 * scale);
    let plane_pose = Pose {
        rotation: Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]),
        translation: h3 * scale,
    }
    .orthonormalized();
    Ok(plane_pose.compose(&to_plane))
}
