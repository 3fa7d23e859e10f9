//! 2D-3D correspondences from coordinate maps and pose recovery.
//!
//! Each valid pixel of a coordinate map is paired with the surface point whose
//! (μ, ν) is closest (`index`). Poses are initialized linearly (control-point
//! method for general point sets, homography for near-planar ones) and refined
//! by damped Gauss-Newton on the reprojection error (`refine`); `ransac`
//! wraps both for maps with gross errors.

mod correspondences;
mod epnp;
mod index;
mod planar;
pub mod ransac;
pub mod refine;

pub use correspondences::{
    extract_correspondences, read_correspondences, write_correspondences, Correspondence,
    CorrespondenceSet, CORRESPONDENCE_FORMAT_VERSION,
};
pub use index::{LookupMode, ParamIndex};
pub use ransac::{solve_pnp_ransac, RansacOptions};

use crate::camera::{CameraModel, Pose};
use crate::Vec3;
use nalgebra::{Matrix3, SymmetricEigen, Vector2};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PnpError {
    #[error("{got} correspondences, at least {need} needed")]
    TooFewPoints { got: usize, need: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("no consensus: best hypothesis has {best} inliers, {needed} needed")]
    NoConsensus { best: usize, needed: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    /// Control-point linear solution for general 3D point sets.
    ControlPoints,
    /// Homography of the best-fit plane.
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the relative RMS decrease of one iteration.
    pub tol: f64,
    /// Point sets whose smallest/largest covariance eigenvalue ratio falls
    /// below this use the planar initializer.
    pub planar_threshold: f64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tol: 1e-10,
            planar_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpResult {
    pub pose: Pose,
    /// Reprojection RMS in pixels over the inliers.
    pub rms: f64,
    /// RMS of the linear initialization.
    pub initial_rms: f64,
    /// Indices (into the correspondence set) used in the final refinement.
    pub inliers: Vec<usize>,
    pub inlier_ratio: f64,
    pub iterations: usize,
    pub converged: bool,
    pub init: InitMethod,
    /// RMS after each accepted refinement step, starting with `initial_rms`.
    pub rms_history: Vec<f64>,
}

/// One observation in solver form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub pixel: Vector2<f64>,
    pub point: Vec3,
}

pub(crate) fn observations(set: &CorrespondenceSet) -> (Vec<Observation>, Vec<usize>) {
    let mut obs = Vec::with_capacity(set.len());
    let mut ids = Vec::with_capacity(set.len());
    for (i, c) in set.items().iter().enumerate() {
        if c.weight > 0.0 {
            obs.push(Observation {
                pixel: c.pixel,
                point: c.point,
            });
            ids.push(i);
        }
    }
    (obs, ids)
}

/// Covariance eigenvalues (ascending) and eigenvectors of the 3D points.
pub(crate) fn point_spread(obs: &[Observation]) -> (Vec3, SymmetricEigen<f64, nalgebra::U3>) {
    let n = obs.len() as f64;
    let c = obs.iter().fold(Vec3::zeros(), |a, o| a + o.point) / n;
    let mut cov = Matrix3::zeros();
    for o in obs {
        let d = o.point - c;
        cov += d * d.transpose();
    }
    cov /= n;
    let mut eig = SymmetricEigen::new(cov);
    // ascending order
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = Vec3::from_fn(|i, _| eig.eigenvalues[order[i]].max(0.0));
    let vecs = Matrix3::from_columns(&order.map(|i| eig.eigenvectors.column(i).into_owned()));
    eig.eigenvalues = vals;
    eig.eigenvectors = vecs;
    (c, eig)
}

/// Which initializer a point set calls for.
pub(crate) fn init_method(obs: &[Observation], opts: &PnpOptions) -> InitMethod {
    let (_, eig) = point_spread(obs);
    if eig.eigenvalues[0] < opts.planar_threshold * eig.eigenvalues[2] {
        InitMethod::Planar
    } else {
        InitMethod::ControlPoints
    }
}

/// Linear initialization on the given observations.
pub(crate) fn initialize(
    obs: &[Observation],
    camera: &CameraModel,
    opts: &PnpOptions,
) -> Result<(Pose, InitMethod), PnpError> {
    if obs.len() < 4 {
        return Err(PnpError::TooFewPoints {
            got: obs.len(),
            need: 4,
        });
    }
    let (_, eig) = point_spread(obs);
    let ev = eig.eigenvalues;
    if !(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2] {
        return Err(PnpError::Degenerate("points are collinear or coincident".into()));
    }
    if init_method(obs, opts) == InitMethod::Planar {
        Ok((planar::homography_pose(obs, camera)?, InitMethod::Planar))
    } else {
        if obs.len() < 6 {
            return Err(PnpError::TooFewPoints {
                got: obs.len(),
                need: 6,
            });
        }
        Ok((epnp::epnp_pose(obs, camera)?, InitMethod::ControlPoints))
    }
}

/// Linear initialization followed by damped Gauss-Newton refinement over all
/// correspondences with positive weight.
pub fn solve_pnp(
    corr: &CorrespondenceSet,
    camera: &CameraModel,
    opts: &PnpOptions,
) -> Result<PnpResult, PnpError> {
    camera
        .validate()
        .map_err(|e| PnpError::Degenerate(e.to_string()))?;
    let (obs, ids) = observations(corr);
    let (init, method) = initialize(&obs, camera, opts)?;
    let refined = refine::refine_pose(&obs, camera, &init, opts)?;
    Ok(PnpResult {
        pose: refined.pose,
        rms: refined.rms,
        initial_rms: refined.history[0],
        inlier_ratio: if corr.is_empty() {
            0.0
        } else {
            ids.len() as f64 / corr.len() as f64
        },
        inliers: ids,
        iterations: refined.iterations,
        converged: refined.converged,
        init: method,
        rms_history: refined.history,
    })
}
