//! Oracle correspondence predictor: a ground-truth map with controlled
//! corruption, standing in for a learned predictor.
//!
//! - `gaussian:m` adds N(0, m²) to μ and ν of every valid pixel, clamped to [0, 1].
//! - `dropout:m` invalidates exactly round(m·n) of the n valid pixels.
//! - `outlier:m` replaces (μ, ν) of exactly round(m·n) valid pixels with
//!   uniform draws from [0, 1]².
//!
//! Depth is never part of a prediction and is dropped.

use super::{sub_seed, DatagenError};
use crate::raster::CoordinateMap;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Dropout,
    Outlier,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Dropout => "dropout",
            NoiseKind::Outlier => "outlier",
        }
    }
}

impl FromStr for NoiseKind {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "dropout" => Ok(NoiseKind::Dropout),
            "outlier" => Ok(NoiseKind::Outlier),
            other => Err(DatagenError::UnknownNoise(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub magnitude: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, magnitude: f64) -> Result<Self, DatagenError> {
        let ok = match kind {
            NoiseKind::Gaussian => magnitude >= 0.0 && magnitude.is_finite(),
            NoiseKind::Dropout | NoiseKind::Outlier => (0.0..=1.0).contains(&magnitude),
        };
        if !ok {
            return Err(DatagenError::NoiseMagnitude(kind.name(), magnitude));
        }
        Ok(Self { kind, magnitude })
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.magnitude)
    }
}

/// Parses `kind:magnitude`, e.g. `outlier:0.1`.
impl FromStr for NoiseSpec {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, mag) = s
            .split_once(':')
            .ok_or_else(|| DatagenError::NoiseSyntax(s.to_string()))?;
        let kind: NoiseKind = kind.trim().parse()?;
        let magnitude: f64 = mag
            .trim()
            .parse()
            .map_err(|_| DatagenError::NoiseSyntax(s.to_string()))?;
        NoiseSpec::new(kind, magnitude)
    }
}

fn chosen(map: &CoordinateMap, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let valid: Vec<(u32, u32)> = map.valid_pixels().map(|(x, y, _)| (x, y)).collect();
    let k = ((fraction * valid.len() as f64).round() as usize).min(valid.len());
    let mut ids = sample(rng, valid.len(), k).into_vec();
    ids.sort_unstable();
    ids.into_iter().map(|i| valid[i]).collect()
}

fn apply(map: &mut CoordinateMap, spec: &NoiseSpec, rng: &mut ChaCha8Rng) {
    if spec.magnitude == 0.0 {
        return;
    }
    match spec.kind {
        NoiseKind::Gaussian => {
            let normal = Normal::new(0.0, spec.magnitude).expect("validated magnitude");
            let pixels: Vec<_> = map.valid_pixels().collect();
            for (x, y, uv) in pixels {
                let mu = uv[0] + normal.sample(rng);
                let nu = uv[1] + normal.sample(rng);
                map.set(x, y, [mu, nu]);
            }
        }
        NoiseKind::Dropout => {
            for (x, y) in chosen(map, spec.magnitude, rng) {
                map.invalidate(x, y);
            }
        }
        NoiseKind::Outlier => {
            for (x, y) in chosen(map, spec.magnitude, rng) {
                let uv = [rng.random::<f64>(), rng.random::<f64>()];
                map.set(x, y, uv);
            }
        }
    }
}

/// Applies the corruptions in order; corruption `k` draws from
/// `sub_seed(seed, k)`.
pub fn oracle_predict(map: &CoordinateMap, noise: &[NoiseSpec], seed: u64) -> CoordinateMap {
    let mut out = map.without_depth();
    for (k, spec) in noise.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, k));
        apply(&mut out, spec, &mut rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let s: NoiseSpec = "outlier:0.1".parse().unwrap();
        assert_eq!(s, NoiseSpec::new(NoiseKind::Outlier, 0.1).unwrap());
        assert_eq!(s.to_string(), "outlier:0.1");
        assert!(matches!("blur:0.1".parse::<NoiseSpec>(), Err(DatagenError::UnknownNoise(_))));
        assert!("dropout:1.5".parse::<NoiseSpec>().is_err());
        assert!("gaussian".parse::<NoiseSpec>().is_err());
        assert!("gaussian:-1".parse::<NoiseSpec>().is_err());
    }
}
