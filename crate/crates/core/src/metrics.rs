//! Pose error measures, map losses and box-plot summaries.
//!
//! Translation errors are reported per axis: `ex = |Δx|`, `ey = |Δy|` in
//! millimeters, and `ez = 100 |Δz| / focal` in percent of the focal length.
//!
//! Quartiles use linear interpolation between order statistics: the
//! p-quantile of sorted values `x_0..x_{n-1}` is `x_k + (h - k)(x_{k+1} - x_k)`
//! with `h = (n - 1) p`, `k = ⌊h⌋`.
//!
//! Map losses compare (μ, ν) over the union of the two validity masks, with
//! an invalid pixel counting as 0 in both channels.

use crate::raster::CoordinateMap;
use nalgebra::Matrix3;
use ndarray::{Array2, Zip};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("not a rotation matrix (deviation {0:e})")]
    NotRotation(f64),
    #[error("focal length must be positive, got {0}")]
    InvalidFocal(f64),
    #[error("shape {0:?} does not match {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("window {window} does not fit a {rows}x{cols} image")]
    WindowTooLarge {
        window: usize,
        rows: usize,
        cols: usize,
    },
    #[error("SSIM constants must be positive")]
    NonPositiveConstant,
    #[error("nothing to summarize")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Angular distance between two rotations in degrees, in [0, 180].
///
/// Computed as `atan2(|axis part|, (tr(R1ᵀR2) - 1) / 2)`, which equals
/// `arccos((tr(R1ᵀR2) - 1) / 2)` but keeps full precision near 0° and 180°.
pub fn rotation_error(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> Result<f64, MetricError> {
    for r in [r1, r2] {
        let dev = crate::camera::Pose::rotation_deviation(r);
        if !(dev <= crate::camera::ROTATION_TOL) {
            return Err(MetricError::NotRotation(dev));
        }
    }
    let m = r1.transpose() * r2;
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5
        * ((m[(2, 1)] - m[(1, 2)]).powi(2)
            + (m[(0, 2)] - m[(2, 0)]).powi(2)
            + (m[(1, 0)] - m[(0, 1)]).powi(2))
        .sqrt();
    Ok(sin.atan2(cos).to_degrees())
}

/// `(|Δx| mm, |Δy| mm, 100 |Δz| / focal %)`.
pub fn translation_error(
    t1: &crate::Vec3,
    t2: &crate::Vec3,
    focal: f64,
) -> Result<(f64, f64, f64), MetricError> {
    if !(focal > 0.0) {
        return Err(MetricError::InvalidFocal(focal));
    }
    let d = t1 - t2;
    Ok((d.x.abs(), d.y.abs(), 100.0 * d.z.abs() / focal))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseErrorReport {
    pub sample_id: String,
    pub rot_deg: f64,
    pub ex_mm: f64,
    pub ey_mm: f64,
    pub ez_pct: f64,
}

impl PoseErrorReport {
    pub fn compare(
        sample_id: &str,
        truth: &crate::camera::Pose,
        estimate: &crate::camera::Pose,
        focal: f64,
    ) -> Result<Self, MetricError> {
        let rot_deg = rotation_error(&truth.rotation, &estimate.rotation)?;
        let (ex_mm, ey_mm, ez_pct) =
            translation_error(&truth.translation, &estimate.translation, focal)?;
        Ok(Self {
            sample_id: sample_id.to_string(),
            rot_deg,
            ex_mm,
            ey_mm,
            ez_pct,
        })
    }
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<(), MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch(a.shape().to_vec(), b.shape().to_vec()));
    }
    Ok(())
}

/// Mean binary cross-entropy of prediction `sigma` against target `rho`,
/// with `sigma` clamped to `[ε, 1 - ε]`.
pub fn bce(rho: &Array2<f64>, sigma: &Array2<f64>) -> Result<f64, MetricError> {
    same_shape(rho, sigma)?;
    if rho.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    Zip::from(rho).and(sigma).for_each(|&r, &s| {
        let s = s.clamp(BCE_EPS, 1.0 - BCE_EPS);
        sum -= r * s.ln() + (1.0 - r) * (1.0 - s).ln();
    });
    Ok(sum / rho.len() as f64)
}

pub fn mse(rho: &Array2<f64>, sigma: &Array2<f64>) -> Result<f64, MetricError> {
    same_shape(rho, sigma)?;
    if rho.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    Zip::from(rho).and(sigma).for_each(|&r, &s| sum += (r - s) * (r - s));
    Ok(sum / rho.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsimParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Side of the square uniform window.
    pub window: usize,
}

impl Default for SsimParams {
    fn default() -> Self {
        let c2 = 0.03f64.powi(2);
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            c1: 0.01f64.powi(2),
            c2,
            c3: c2 / 2.0,
            window: 7,
        }
    }
}

/// Summed-area table with a zero first row and column.
fn integral(a: &Array2<f64>) -> Array2<f64> {
    let (r, c) = a.dim();
    let mut s = Array2::zeros((r + 1, c + 1));
    for i in 0..r {
        let mut row = 0.0;
        for j in 0..c {
            row += a[(i, j)];
            s[(i + 1, j + 1)] = s[(i, j + 1)] + row;
        }
    }
    s
}

fn window_sum(s: &Array2<f64>, i: usize, j: usize, w: usize) -> f64 {
    s[(i + w, j + w)] - s[(i, j + w)] - s[(i + w, j)] + s[(i, j)]
}

/// Mean over all fully contained windows of `l^α c^β s^γ`, with population
/// statistics inside each window.
pub fn ssim(rho: &Array2<f64>, sigma: &Array2<f64>, p: &SsimParams) -> Result<f64, MetricError> {
    same_shape(rho, sigma)?;
    if !(p.c1 > 0.0 && p.c2 > 0.0 && p.c3 > 0.0) {
        return Err(MetricError::NonPositiveConstant);
    }
    let (rows, cols) = rho.dim();
    let w = p.window;
    if w == 0 || w > rows || w > cols {
        return Err(MetricError::WindowTooLarge {
            window: w,
            rows,
            cols,
        });
    }
    let sx = integral(rho);
    let sy = integral(sigma);
    let sxx = integral(&(rho * rho));
    let syy = integral(&(sigma * sigma));
    let sxy = integral(&(rho * sigma));
    let n = (w * w) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=rows - w {
        for j in 0..=cols - w {
            let mx = window_sum(&sx, i, j, w) / n;
            let my = window_sum(&sy, i, j, w) / n;
            let vx = (window_sum(&sxx, i, j, w) / n - mx * mx).max(0.0);
            let vy = (window_sum(&syy, i, j, w) / n - my * my).max(0.0);
            let cov = window_sum(&sxy, i, j, w) / n - mx * my;
            let (dx, dy) = (vx.sqrt(), vy.sqrt());
            let l = (2.0 * mx * my + p.c1) / (mx * mx + my * my + p.c1);
            let c = (2.0 * dx * dy + p.c2) / (vx + vy + p.c2);
            let s = (cov + p.c3) / (dx * dy + p.c3);
            total += l.powf(p.alpha) * c.powf(p.beta) * s.powf(p.gamma);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Equal-weight combination `(bce + mse + (1 - ssim)) / 3` with default SSIM
/// parameters.
pub fn combined_loss(rho: &Array2<f64>, sigma: &Array2<f64>) -> Result<f64, MetricError> {
    let b = bce(rho, sigma)?;
    let m = mse(rho, sigma)?;
    let s = ssim(rho, sigma, &SsimParams::default())?;
    Ok(combine(b, m, s))
}

pub fn combine(bce: f64, mse: f64, ssim: f64) -> f64 {
    (bce + mse + (1.0 - ssim)) / 3.0
}

/// Losses between a ground-truth and a predicted coordinate map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub bce: f64,
    pub mse: f64,
    pub ssim: f64,
    pub combined: f64,
    /// Pixels in the union of the validity masks.
    pub pixels: usize,
    /// How the maps were compared, for output metadata.
    pub channels: &'static str,
}

fn planes(map: &CoordinateMap) -> (Array2<f64>, Array2<f64>) {
    let (w, h) = (map.width() as usize, map.height() as usize);
    let mut mu = Array2::zeros((h, w));
    let mut nu = Array2::zeros((h, w));
    for (x, y, uv) in map.valid_pixels() {
        mu[(y as usize, x as usize)] = uv[0];
        nu[(y as usize, x as usize)] = uv[1];
    }
    (mu, nu)
}

/// BCE and MSE over the union of valid pixels (both channels); SSIM as the
/// mean of the per-channel values on the full planes.
pub fn map_losses(truth: &CoordinateMap, pred: &CoordinateMap) -> Result<LossReport, MetricError> {
    let (tm, tn) = planes(truth);
    let (pm, pn) = planes(pred);
    same_shape(&tm, &pm)?;
    let union: Vec<(usize, usize)> = (0..truth.height())
        .flat_map(|y| (0..truth.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| truth.is_valid(x, y) || pred.is_valid(x, y))
        .map(|(x, y)| (y as usize, x as usize))
        .collect();
    let gather = |mu: &Array2<f64>, nu: &Array2<f64>| {
        Array2::from_shape_fn((union.len(), 2), |(i, k)| {
            let (r, c) = union[i];
            if k == 0 {
                mu[(r, c)]
            } else {
                nu[(r, c)]
            }
        })
    };
    let (tv, pv) = (gather(&tm, &tn), gather(&pm, &pn));
    let b = bce(&tv, &pv)?;
    let m = mse(&tv, &pv)?;
    let params = SsimParams::default();
    let s = 0.5 * (ssim(&tm, &pm, &params)? + ssim(&tn, &pn, &params)?);
    Ok(LossReport {
        bce: b,
        mse: m,
        ssim: s,
        combined: combine(b, m, s),
        pixels: union.len(),
        channels: "mu,nu over union of valid masks",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub metric: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let k = h.floor() as usize;
    if k + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[k] + (h - k as f64) * (sorted[k + 1] - sorted[k])
}

pub fn summarize_values(metric: &str, values: &[f64]) -> Result<ErrorSummary, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(ErrorSummary {
        metric: metric.to_string(),
        count: v.len(),
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

/// One summary per metric, in CSV column order.
pub fn summarize(reports: &[PoseErrorReport]) -> Result<Vec<ErrorSummary>, MetricError> {
    let col = |f: fn(&PoseErrorReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    Ok(vec![
        summarize_values("rot_deg", &col(|r| r.rot_deg))?,
        summarize_values("ex_mm", &col(|r| r.ex_mm))?,
        summarize_values("ey_mm", &col(|r| r.ey_mm))?,
        summarize_values("ez_pct", &col(|r| r.ez_pct))?,
    ])
}

/// `sample_id,rot_deg,ex_mm,ey_mm,ez_pct`, one row per report.
pub fn write_errors_csv<W: Write>(reports: &[PoseErrorReport], out: W) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    if reports.is_empty() {
        w.write_record(["sample_id", "rot_deg", "ex_mm", "ey_mm", "ez_pct"])?;
    }
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,count,min,q1,median,q3,max,mean`, one row per metric.
pub fn write_summary_csv<W: Write>(summary: &[ErrorSummary], out: W) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn quartiles_of_one_to_five() {
        let s = summarize_values("x", &[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(s.mean, 3.0);
    }

    #[test]
    fn single_value_summary() {
        let s = summarize_values("x", &[0.7]).unwrap();
        assert!([s.min, s.q1, s.median, s.q3, s.max].iter().all(|&v| v == 0.7));
        assert!(matches!(summarize_values("x", &[]), Err(MetricError::Empty)));
    }

    #[test]
    fn translation_arithmetic() {
        let (ex, ey, ez) = translation_error(
            &crate::Vec3::new(2.0, 3.0, 275.0),
            &crate::Vec3::zeros(),
            50_000.0,
        )
        .unwrap();
        assert_eq!((ex, ey), (2.0, 3.0));
        assert!((ez - 0.55).abs() < 1e-12);
    }

    #[test]
    fn bce_of_halves_is_ln2() {
        let a = array![[0.5, 0.5], [0.5, 0.5]];
        assert!((bce(&a, &a).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Array2::<f64>::zeros((2, 2));
        let b = Array2::<f64>::zeros((2, 3));
        assert!(mse(&a, &b).is_err());
        assert!(bce(&a, &b).is_err());
    }
}
