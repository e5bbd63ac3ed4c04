//! Empirical decay rate of the discretized Lévy-area discrepancy
//!
//! ```text
//! S_n = Σ_k [ ∫∫_{t_k<u<s<t_{k+1}} dX^a_u dX²_s − ∫∫_{t_k<s<u<t_{k+1}} dX^a_u dX²_s ]
//!     = Σ_k ∫_{t_k}^{t_{k+1}} (2 X^a_s − X^a_{t_k} − X^a_{t_{k+1}}) dX²_s
//! ```
//!
//! for `a = 3` (two independent fBms, expected `‖S_n‖_{L²} ~ h^{2H−1/2}`) and
//! `a = 1` (time against an fBm, expected `h^{H+1/2}`). Iterated fBm integrals
//! have no closed form, so each coarse cell is split into `refinement` fine
//! steps and the outer integral is a left Riemann sum on that fine grid.

use serde::{Deserialize, Serialize};

use super::compensated_sum;
use super::fit::fit_loglog_slope;
use super::map_indexed;
use crate::error::{Error, Result};
use crate::fbm::{DrivingPath, HurstParameter, PathSampler, SamplerKind, UniformGrid};
use crate::rng::derive_seed;

pub const MIN_REFINEMENT: usize = 16;

#[derive(Debug, Clone)]
pub struct LevyConfig {
    pub hurst: HurstParameter,
    pub levels: Vec<usize>,
    pub refinement: usize,
    pub paths: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
}

impl LevyConfig {
    /// Levels `2^4 … 2^8`, refinement 16, 500 paths.
    pub fn desk(hurst: HurstParameter, seed: u64) -> Self {
        Self {
            hurst,
            levels: (4..=8).map(|p| 1usize << p).collect(),
            refinement: MIN_REFINEMENT,
            paths: 500,
            seed,
            sampler: SamplerKind::Circulant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyDiscrepancySample {
    pub n: usize,
    /// Monte Carlo estimate of `‖S_n‖_{L²(Ω)}`.
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyFit {
    pub samples: Vec<LevyDiscrepancySample>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub expected_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyReport {
    pub hurst: f64,
    pub refinement: usize,
    pub paths: usize,
    pub seed: u64,
    /// Two fBm coordinates.
    pub area: LevyFit,
    /// Time against one fBm coordinate.
    pub time_area: LevyFit,
}

/// `S_n` for coordinate pair `(outer = 2, inner)` using a fine path whose
/// step count is a multiple of `n · refinement`.
fn discrepancy(fine: &DrivingPath, n: usize, refinement: usize, inner: usize) -> f64 {
    let stride = fine.grid().steps() / (n * refinement);
    let mut total = 0.0;
    for k in 0..n {
        let start = k * refinement * stride;
        let end = (k + 1) * refinement * stride;
        let edges = fine.value(start, inner) + fine.value(end, inner);
        let mut cell = 0.0;
        for j in 0..refinement {
            let idx = start + j * stride;
            let dx2 = fine.value(idx + stride, 1) - fine.value(idx, 1);
            cell += (2.0 * fine.value(idx, inner) - edges) * dx2;
        }
        total += cell;
    }
    total
}

pub fn levy_discrepancy_rate(cfg: &LevyConfig) -> Result<LevyReport> {
    if cfg.refinement < MIN_REFINEMENT {
        return Err(Error::domain(format!("refinement must be at least {MIN_REFINEMENT}, got {}", cfg.refinement)));
    }
    if cfg.levels.len() < 3 {
        return Err(Error::domain("need at least 3 levels for a slope"));
    }
    if cfg.paths < 2 {
        return Err(Error::domain("need at least 2 sample paths"));
    }
    let finest = *cfg.levels.iter().max().expect("nonempty");
    if cfg.levels.iter().any(|&n| n == 0 || !finest.is_multiple_of(n)) {
        return Err(Error::domain("every level must divide the finest level"));
    }
    let grid = UniformGrid::new(1.0, finest * cfg.refinement)?;
    let sampler = PathSampler::new(cfg.sampler, grid, cfg.hurst)?;

    let per_path: Vec<Result<Vec<(f64, f64)>>> = map_indexed(cfg.paths, |p| {
        let path = sampler.sample(3, derive_seed(cfg.seed, &[p as u64]))?;
        Ok(cfg
            .levels
            .iter()
            .map(|&n| (discrepancy(&path, n, cfg.refinement, 2), discrepancy(&path, n, cfg.refinement, 0)))
            .collect())
    });
    let per_path: Vec<Vec<(f64, f64)>> = per_path.into_iter().collect::<Result<_>>()?;

    let h = cfg.hurst.value();
    let build = |pick: fn(&(f64, f64)) -> f64, expected_rate: f64| -> Result<LevyFit> {
        let samples: Vec<LevyDiscrepancySample> = cfg
            .levels
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let ms = compensated_sum(per_path.iter().map(|v| pick(&v[i]).powi(2))) / cfg.paths as f64;
                LevyDiscrepancySample { n, statistic: ms.sqrt() }
            })
            .collect();
        let hs: Vec<f64> = samples.iter().map(|s| 1.0 / s.n as f64).collect();
        let vs: Vec<f64> = samples.iter().map(|s| s.statistic).collect();
        let fit = fit_loglog_slope(&hs, &vs)?;
        Ok(LevyFit { samples, slope: fit.slope, slope_stderr: fit.slope_stderr, expected_rate })
    };
    Ok(LevyReport {
        hurst: h,
        refinement: cfg.refinement,
        paths: cfg.paths,
        seed: cfg.seed,
        area: build(|v| v.0, 2.0 * h - 0.5)?,
        time_area: build(|v| v.1, h + 0.5)?,
    })
}
