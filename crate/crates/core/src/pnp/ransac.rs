//! Consensus pose estimation for correspondence sets with gross outliers.

use super::refine::{refine_pose, rms};
use super::{init_method, initialize, observations, CorrespondenceSet, Observation, PnpError, PnpOptions, PnpResult};
use crate::camera::{CameraModel, Pose};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacOptions {
    pub iterations: usize,
    pub inlier_threshold_px: f64,
    pub seed: u64,
    /// Correspondences drawn per hypothesis.
    pub min_sample: usize,
    /// Absolute lower bound on the consensus size.
    pub min_inliers: usize,
    /// Lower bound on the consensus size as a fraction of all correspondences.
    pub min_inlier_ratio: f64,
    /// Refinement iterations spent on each minimal sample.
    pub sample_refine_iterations: usize,
    pub solver: PnpOptions,
}

impl Default for RansacOptions {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold_px: 8.0,
            seed: 0,
            min_sample: 6,
            min_inliers: 6,
            min_inlier_ratio: 0.25,
            sample_refine_iterations: 10,
            solver: PnpOptions::default(),
        }
    }
}

fn inliers_of(obs: &[Observation], camera: &CameraModel, pose: &Pose, thr2: f64) -> (Vec<usize>, f64) {
    let mut ids = Vec::new();
    let mut sse = 0.0;
    for (i, o) in obs.iter().enumerate() {
        let q = pose.transform_point(&o.point);
        if q.z <= 0.0 {
            continue;
        }
        let du = camera.focal * q.x / q.z + camera.cx - o.pixel.x;
        let dv = camera.focal * q.y / q.z + camera.cy - o.pixel.y;
        let e = du * du + dv * dv;
        if e <= thr2 {
            ids.push(i);
            sse += e;
        }
    }
    (ids, sse)
}

/// Samples hypotheses from `min_sample` correspondences, keeps the one with
/// the largest consensus (ties: smaller inlier error), then refines on its
/// inliers until the inlier set stops changing. Deterministic given the seed.
pub fn solve_pnp_ransac(
    corr: &CorrespondenceSet,
    camera: &CameraModel,
    opts: &RansacOptions,
) -> Result<PnpResult, PnpError> {
    camera
        .validate()
        .map_err(|e| PnpError::Degenerate(e.to_string()))?;
    let (obs, ids) = observations(corr);
    let need_sample = opts.min_sample.max(4);
    if obs.len() < need_sample {
        return Err(PnpError::TooFewPoints {
            got: obs.len(),
            need: need_sample,
        });
    }
    let needed = opts
        .min_inliers
        .max((opts.min_inlier_ratio * obs.len() as f64).ceil() as usize)
        .max(need_sample);
    let thr2 = opts.inlier_threshold_px * opts.inlier_threshold_px;
    let sample_opts = PnpOptions {
        max_iterations: opts.sample_refine_iterations,
        ..opts.solver
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(usize, f64, Pose)> = None;
    let mut last_error = None;
    for _ in 0..opts.iterations {
        let pick: Vec<Observation> = sample(&mut rng, obs.len(), need_sample)
            .into_iter()
            .map(|i| obs[i])
            .collect();
        let hypothesis = initialize(&pick, camera, &opts.solver).and_then(|(p, _)| {
            if opts.sample_refine_iterations > 0 {
                refine_pose(&pick, camera, &p, &sample_opts).map(|r| r.pose)
            } else {
                Ok(p)
            }
        });
        let pose = match hypothesis {
            Ok(p) => p,
            Err(e) => {
                last_error = Some(e);
                continue;
            }
        };
        let (inl, sse) = inliers_of(&obs, camera, &pose, thr2);
        let better = match &best {
            None => true,
            Some((n, e, _)) => inl.len() > *n || (inl.len() == *n && sse < *e),
        };
        if better {
            best = Some((inl.len(), sse, pose));
        }
    }
    let Some((count, _, mut pose)) = best else {
        return Err(last_error.unwrap_or(PnpError::NoConsensus { best: 0, needed }));
    };
    if count < needed {
        return Err(PnpError::NoConsensus {
            best: count,
            needed,
        });
    }

    let (mut inl, _) = inliers_of(&obs, camera, &pose, thr2);
    let mut result = None;
    for _ in 0..5 {
        let subset = select(&obs, &inl);
        let refined = refine_pose(&subset, camera, &pose, &opts.solver)?;
        pose = refined.pose;
        let (next, _) = inliers_of(&obs, camera, &pose, thr2);
        let stable = next == inl;
        result = Some(refined);
        if stable || next.len() < needed {
            break;
        }
        inl = next;
    }
    let refined = result.expect("at least one refinement");
    let subset = select(&obs, &inl);
    Ok(PnpResult {
        pose: refined.pose,
        rms: rms(&subset, camera, &refined.pose).unwrap_or(refined.rms),
        initial_rms: refined.history[0],
        inlier_ratio: inl.len() as f64 / corr.len() as f64,
        inliers: inl.iter().map(|&i| ids[i]).collect(),
        iterations: refined.iterations,
        converged: refined.converged,
        init: init_method(&subset, &opts.solver),
        rms_history: refined.history,
    })
}

fn select(obs: &[Observation], ids: &[usize]) -> Vec<Observation> {
    ids.iter().map(|&i| obs[i]).collect()
}
