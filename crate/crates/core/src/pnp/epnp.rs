//! Control-point linear initialization for general (non-planar) point sets.
//!
//! Every 3D point is written as an affine combination of four control points
//! (the centroid and the principal axes). The camera-frame control points lie
//! in the null space of a 2n×12 system built from the normalized image
//! coordinates; the null-space combination is fixed by requiring the control
//! points' mutual distances to match the world ones, for 1, 2 and 3 null
//! vectors in turn. The candidate with the smallest reprojection error wins.

use super::refine::rms;
use super::{point_spread, Observation, PnpError};
use crate::camera::{CameraModel, Pose};
use crate::Vec3;
use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SymmetricEigen};

type Mat12 = SMatrix<f64, 12, 12>;

pub(crate) fn epnp_pose(obs: &[Observation], camera: &CameraModel) -> Result<Pose, PnpError> {
    let (c0, eig) = point_spread(obs);
    let mut ctrl = [c0; 4];
    for k in 0..3 {
        let axis: Vec3 = eig.eigenvectors.column(k).into_owned();
        ctrl[k + 1] = c0 + axis * eig.eigenvalues[k].sqrt();
    }
    let basis = Matrix3::from_columns(&[ctrl[1] - c0, ctrl[2] - c0, ctrl[3] - c0]);
    let inv = basis
        .try_inverse()
        .ok_or_else(|| PnpError::Degenerate("control points are coplanar".into()))?;
    let alphas: Vec<[f64; 4]> = obs
        .iter()
        .map(|o| {
            let a = inv * (o.point - c0);
            [1.0 - a.x - a.y - a.z, a.x, a.y, a.z]
        })
        .collect();

    let mut mtm = Mat12::zeros();
    for (o, a) in obs.iter().zip(&alphas) {
        let x = (o.pixel.x - camera.cx) / camera.focal;
        let y = (o.pixel.y - camera.cy) / camera.focal;
        let mut r1 = [0.0; 12];
        let mut r2 = [0.0; 12];
        for j in 0..4 {
            r1[3 * j] = a[j];
            r1[3 * j + 2] = -a[j] * x;
            r2[3 * j + 1] = a[j];
            r2[3 * j + 2] = -a[j] * y;
        }
        for p in 0..12 {
            for q in 0..12 {
                mtm[(p, q)] += r1[p] * r1[q] + r2[p] * r2[q];
            }
        }
    }
    let eig12 = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..12).collect();
    order.sort_by(|&a, &b| eig12.eigenvalues[a].total_cmp(&eig12.eigenvalues[b]));
    let null: Vec<[Vec3; 4]> = order[..3]
        .iter()
        .map(|&k| {
            let v = eig12.eigenvectors.column(k);
            std::array::from_fn(|i| Vec3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]))
        })
        .collect();

    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let rho: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| (ctrl[i] - ctrl[j]).norm_squared())
        .collect();

    let mut best: Option<(f64, Pose)> = None;
    for n in 1..=3 {
        let Some(betas) = initial_betas(&null[..n], &pairs, &rho) else {
            continue;
        };
        let betas = gauss_newton_betas(&null[..n], &pairs, &rho, betas);
        let Some(pose) = pose_from_betas(obs, &alphas, &null[..n], &betas) else {
            continue;
        };
        if let Some(e) = rms(obs, camera, &pose) {
            if best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, pose));
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| PnpError::Numerical("no control-point solution in front of the camera".into()))
}

fn diffs(v: &[Vec3; 4], pairs: &[(usize, usize)]) -> Vec<Vec3> {
    pairs.iter().map(|&(i, j)| v[i] - v[j]).collect()
}

/// Linearized solution for the betas from products `β_k β_l`.
fn initial_betas(null: &[[Vec3; 4]], pairs: &[(usize, usize)], rho: &[f64]) -> Option<Vec<f64>> {
    let n = null.len();
    let d: Vec<Vec<Vec3>> = null.iter().map(|v| diffs(v, pairs)).collect();
    if n == 1 {
        let num: f64 = (0..6).map(|p| d[0][p].norm() * rho[p].sqrt()).sum();
        let den: f64 = (0..6).map(|p| d[0][p].norm_squared()).sum();
        return (den > 0.0).then(|| vec![num / den]);
    }
    // unknowns: b_kl for k <= l
    let prods: Vec<(usize, usize)> = (0..n).flat_map(|k| (k..n).map(move |l| (k, l))).collect();
    let mut l = DMatrix::zeros(6, prods.len());
    for p in 0..6 {
        for (c, &(k, m)) in prods.iter().enumerate() {
            let v = d[k][p].dot(&d[m][p]);
            l[(p, c)] = if k == m { v } else { 2.0 * v };
        }
    }
    let b = l.svd(true, true).solve(&DVector::from_column_slice(rho), 1e-12).ok()?;
    let b11 = b[0];
    if b11 <= 0.0 {
        return None;
    }
    let b1 = b11.sqrt();
    // b_1k = β1 βk
    let mut betas = vec![b1];
    for (c, &(k, m)) in prods.iter().enumerate() {
        if k == 0 && m > 0 {
            betas.push(b[c] / b1);
        }
    }
    Some(betas)
}

fn gauss_newton_betas(
    null: &[[Vec3; 4]],
    pairs: &[(usize, usize)],
    rho: &[f64],
    mut betas: Vec<f64>,
) -> Vec<f64> {
    let n = null.len();
    let d: Vec<Vec<Vec3>> = null.iter().map(|v| diffs(v, pairs)).collect();
    for _ in 0..10 {
        let mut j = DMatrix::zeros(6, n);
        let mut r = DVector::zeros(6);
        for p in 0..6 {
            let s: Vec3 = (0..n).fold(Vec3::zeros(), |acc, k| acc + d[k][p] * betas[k]);
            r[p] = s.norm_squared() - rho[p];
            for k in 0..n {
                j[(p, k)] = 2.0 * s.dot(&d[k][p]);
            }
        }
        let Ok(step) = j.svd(true, true).solve(&r, 1e-14) else {
            break;
        };
        for k in 0..n {
            betas[k] -= step[k];
        }
    }
    betas
}

fn pose_from_betas(
    obs: &[Observation],
    alphas: &[[f64; 4]],
    null: &[[Vec3; 4]],
    betas: &[f64],
) -> Option<Pose> {
    let mut cam = [Vec3::zeros(); 4];
    for (v, &b) in null.iter().zip(betas) {
        for i in 0..4 {
            cam[i] += v[i] * b;
        }
    }
    let mut pc: Vec<Vec3> = alphas
        .iter()
        .map(|a| cam[0] * a[0] + cam[1] * a[1] + cam[2] * a[2] + cam[3] * a[3])
        .collect();
    let mean_z = pc.iter().map(|p| p.z).sum::<f64>() / pc.len() as f64;
    if mean_z < 0.0 {
        pc.iter_mut().for_each(|p| *p = -*p);
    }
    let world: Vec<Vec3> = obs.iter().map(|o| o.point).collect();
    rigid_fit(&world, &pc)
}

/// Least-squares rigid motion taking `from` onto `to`.
pub(crate) fn rigid_fit(from: &[Vec3], to: &[Vec3]) -> Option<Pose> {
    let n = from.len() as f64;
    let cf = from.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let ct = to.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (p, q) in from.iter().zip(to) {
        h += (p - cf) * (q - ct).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let v = vt.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = v * d * u.transpose();
    let t = ct - r * cf;
    r.iter().all(|x| x.is_finite()).then_some(Pose {
        rotation: r,
        translation: t,
    })
}
