//! Damped Gauss-Newton refinement of a pose on reprojection error.
//!
//! The state is perturbed as `R ← exp([ω]×) R`, `t ← t + δt`, so the rotation
//! stays on SO(3) during the iterations; it is re-orthonormalized once at the
//! end. Damping is multiplied by 10 on a rejected step and divided by 10 on an
//! accepted one.

use super::{Observation, PnpError, PnpOptions};
use crate::camera::{CameraModel, Pose};
use crate::Vec3;
use nalgebra::{Matrix2x6, Matrix6, Vector2, Vector6};

/// Reprojection residual (projected minus observed) of one observation and
/// its Jacobian with respect to `(ω, δt)`. `None` if the point is not in
/// front of the camera.
pub fn residual_and_jacobian(
    obs: &Observation,
    camera: &CameraModel,
    pose: &Pose,
) -> Option<(Vector2<f64>, Matrix2x6<f64>)> {
    let rp = pose.rotation * obs.point;
    let q = rp + pose.translation;
    if q.z <= 0.0 {
        return None;
    }
    let (f, iz) = (camera.focal, 1.0 / q.z);
    let r = Vector2::new(
        f * q.x * iz + camera.cx - obs.pixel.x,
        f * q.y * iz + camera.cy - obs.pixel.y,
    );
    // d(u, v)/dq
    let du = [f * iz, 0.0, -f * q.x * iz * iz];
    let dv = [0.0, f * iz, -f * q.y * iz * iz];
    // dq/dω = -[R p]×, dq/dδt = I
    let skew = [
        [0.0, rp.z, -rp.y],
        [-rp.z, 0.0, rp.x],
        [rp.y, -rp.x, 0.0],
    ];
    let mut j = Matrix2x6::zeros();
    for c in 0..3 {
        let col_w = Vec3::new(skew[0][c], skew[1][c], skew[2][c]);
        j[(0, c)] = du[0] * col_w.x + du[1] * col_w.y + du[2] * col_w.z;
        j[(1, c)] = dv[0] * col_w.x + dv[1] * col_w.y + dv[2] * col_w.z;
        j[(0, 3 + c)] = du[c];
        j[(1, 3 + c)] = dv[c];
    }
    Some((r, j))
}

/// Applies a `(ω, δt)` increment.
pub fn apply_increment(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let w = Vec3::new(delta[0], delta[1], delta[2]);
    let dt = Vec3::new(delta[3], delta[4], delta[5]);
    let step = Pose::from_rotation_vector(&w, Vec3::zeros());
    Pose {
        rotation: step.rotation * pose.rotation,
        translation: pose.translation + dt,
    }
}

/// Sum of squared residuals, or `None` if a point falls behind the camera.
pub fn cost(obs: &[Observation], camera: &CameraModel, pose: &Pose) -> Option<f64> {
    let mut sum = 0.0;
    for o in obs {
        let q = pose.transform_point(&o.point);
        if q.z <= 0.0 {
            return None;
        }
        let u = camera.focal * q.x / q.z + camera.cx - o.pixel.x;
        let v = camera.focal * q.y / q.z + camera.cy - o.pixel.y;
        sum += u * u + v * v;
    }
    Some(sum)
}

pub fn rms(obs: &[Observation], camera: &CameraModel, pose: &Pose) -> Option<f64> {
    cost(obs, camera, pose).map(|c| (c / obs.len().max(1) as f64).sqrt())
}

fn normal_equations(
    obs: &[Observation],
    camera: &CameraModel,
    pose: &Pose,
) -> Option<(Matrix6<f64>, Vector6<f64>)> {
    let mut a = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for o in obs {
        let (r, j) = residual_and_jacobian(o, camera, pose)?;
        a += j.transpose() * j;
        g += j.transpose() * r;
    }
    Some((a, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub pose: Pose,
    pub rms: f64,
    /// RMS before refinement, then after each accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn refine_pose(
    obs: &[Observation],
    camera: &CameraModel,
    init: &Pose,
    opts: &PnpOptions,
) -> Result<Refinement, PnpError> {
    if obs.is_empty() {
        return Err(PnpError::TooFewPoints { got: 0, need: 4 });
    }
    let n = obs.len() as f64;
    let mut pose = *init;
    let mut current = cost(obs, camera, &pose).ok_or_else(|| {
        PnpError::Numerical("initial pose puts points behind the camera".into())
    })?;
    let mut history = vec![(current / n).sqrt()];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut normal = normal_equations(obs, camera, &pose);
    while iterations < opts.max_iterations {
        iterations += 1;
        if current == 0.0 {
            converged = true;
            break;
        }
        let (a, g) = normal.ok_or_else(|| PnpError::Numerical("point behind camera".into()))?;
        let mut damped = a;
        let floor = 1e-12 * a.diagonal().max();
        for k in 0..6 {
            damped[(k, k)] += lambda * a[(k, k)].max(floor);
        }
        let Some(delta) = damped.cholesky().map(|c| -c.solve(&g)) else {
            lambda *= 10.0;
            continue;
        };
        let candidate = apply_increment(&pose, &delta);
        match cost(obs, camera, &candidate) {
            Some(c) if c < current => {
                let before = (current / n).sqrt();
                let after = (c / n).sqrt();
                pose = candidate;
                current = c;
                history.push(after);
                lambda = (lambda / 10.0).max(1e-12);
                normal = normal_equations(obs, camera, &pose);
                if (before - after) / before < opts.tol {
                    converged = true;
                    break;
                }
            }
            _ => {
                lambda *= 10.0;
                if lambda > 1e12 {
                    // no descent direction left at this precision
                    converged = true;
                    break;
                }
            }
        }
    }
    let pose = pose.orthonormalized();
    let rms = rms(obs, camera, &pose)
        .ok_or_else(|| PnpError::Numerical("refined pose puts points behind the camera".into()))?;
    if !rms.is_finite() {
        return Err(PnpError::Numerical("non-finite reprojection error".into()));
    }
    Ok(Refinement {
        pose,
        rms,
        history,
        iterations,
        converged,
    })
}
