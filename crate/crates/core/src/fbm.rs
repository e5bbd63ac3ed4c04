//! Exact sampling of the driver `X = (t, B², …, Bᵈ)` on uniform grids.
//!
//! Coordinates `2..=d` are independent fractional Brownian motions with a
//! common Hurst parameter; their increments on a grid of step `h` form
//! fractional Gaussian noise with autocovariance
//!
//! ```text
//! γ(k) = h^{2H}/2 · (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})
//! ```
//!
//! Two exact samplers are provided. [`CholeskySampler`] factors the `n × n`
//! increment covariance and serves as the reference; [`CirculantSampler`]
//! embeds the covariance in a circulant matrix (Davies–Harte) and is the
//! default for large grids.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::coordinate_rng;

/// Largest grid the Cholesky sampler accepts.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstParameter {
    value: f64,
    sampling_only: bool,
}

impl HurstParameter {
    /// Hurst parameter usable by the integrators: `1/2 < H < 1`.
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.5 && value < 1.0) {
            return Err(Error::domain(format!(
                "Hurst parameter {value} outside (1/2, 1); use HurstParameter::sampling_only for path sampling"
            )));
        }
        Ok(Self { value, sampling_only: false })
    }

    /// Hurst parameter for sampling only, accepting any `0 < H < 1`.
    pub fn sampling_only(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::domain(format!("Hurst parameter {value} outside (0, 1)")));
        }
        Ok(Self { value, sampling_only: !(value > 0.5) })
    }

    pub fn value(self) -> f64 {
        self.value
    }

    /// True when the value lies outside the range covered by the scheme theory.
    pub fn is_sampling_only(self) -> bool {
        self.sampling_only
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    horizon: f64,
    steps: usize,
}

impl UniformGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k = k·T/n`, computed directly rather than by accumulation.
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.steps as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }

    /// Ratio of step counts when `coarse` shares this grid's horizon and divides it.
    pub(crate) fn coarsening_factor(&self, coarse: &UniformGrid) -> Option<usize> {
        if coarse.horizon != self.horizon || coarse.steps == 0 || !self.steps.is_multiple_of(coarse.steps) {
            return None;
        }
        Some(self.steps / coarse.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Cholesky,
    Circulant,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Cholesky => "cholesky",
            SamplerKind::Circulant => "circulant",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(SamplerKind::Cholesky),
            "circulant" => Ok(SamplerKind::Circulant),
            other => Err(Error::domain(format!("unknown sampler '{other}' (expected cholesky or circulant)"))),
        }
    }
}

/// Identifies the realization a path came from. Restriction keeps it, so
/// paths on different grids can be checked for a shared origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub sampler: SamplerKind,
    /// Step count of the grid the realization was generated on.
    pub source_steps: usize,
}

/// Grid-sampled realization of the driver, stored as levels (not increments).
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    grid: UniformGrid,
    hurst: HurstParameter,
    dim: usize,
    values: Arc<[f64]>,
    seed_record: SeedRecord,
}

impl DrivingPath {
    /// Builds a path from raw levels, row-major `(n+1) × d`. The time column
    /// and zero start are validated.
    pub fn from_levels(
        grid: UniformGrid,
        hurst: HurstParameter,
        dim: usize,
        values: Vec<f64>,
        seed_record: SeedRecord,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("driver dimension must be at least 1"));
        }
        if values.len() != (grid.steps() + 1) * dim {
            return Err(Error::domain(format!(
                "expected {} values for {} nodes × {dim} coordinates, got {}",
                (grid.steps() + 1) * dim,
                grid.steps() + 1,
                values.len()
            )));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::domain("driver path must start at zero"));
        }
        for k in 0..=grid.steps() {
            if values[k * dim] != grid.node(k) {
                return Err(Error::domain(format!("time coordinate at node {k} is not k·T/n")));
            }
        }
        Ok(Self { grid, hurst, dim, values: values.into(), seed_record })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed_record(&self) -> SeedRecord {
        self.seed_record
    }

    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.dim + l]
    }

    /// Driver values at node `k`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Writes `ΔX_k = X_{t_{k+1}} − X_{t_k}` into `out`.
    pub fn increment_into(&self, k: usize, out: &mut [f64]) {
        let (a, b) = (self.row(k), self.row(k + 1));
        for ((o, x0), x1) in out.iter_mut().zip(a).zip(b) {
            *o = x1 - x0;
        }
    }

    pub fn increment(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.increment_into(k, &mut out);
        out
    }

    /// The same realization on the grid with `n / factor` steps.
    pub fn restrict(&self, factor: usize) -> Result<DrivingPath> {
        restrict(self, factor)
    }
}

/// `E[B_s B_t] = (t^{2H} + s^{2H} − |t−s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstParameter) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::domain(format!("times must be non-negative, got s={s}, t={t}")));
    }
    let two_h = 2.0 * hurst.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Autocovariance of fractional Gaussian noise on a grid of step `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgnCovariance {
    hurst: HurstParameter,
    step: f64,
}

impl FgnCovariance {
    pub fn new(hurst: HurstParameter, step: f64) -> Self {
        Self { hurst, step }
    }

    /// `Cov(ΔB_i, ΔB_{i+lag})`; symmetric in `lag`.
    pub fn at(&self, lag: i64) -> f64 {
        let two_h = 2.0 * self.hurst.value();
        let k = lag.unsigned_abs() as f64;
        let unit = 0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).abs().powf(two_h) - 2.0 * k.powf(two_h));
        self.step.powf(two_h) * unit
    }
}

fn assemble_path(
    grid: UniformGrid,
    hurst: HurstParameter,
    dim: usize,
    seed: u64,
    sampler: SamplerKind,
    mut increments: impl FnMut(usize, &mut [f64]),
) -> DrivingPath {
    let n = grid.steps();
    let mut values = vec![0.0; (n + 1) * dim];
    for k in 0..=n {
        values[k * dim] = grid.node(k);
    }
    let mut inc = vec![0.0; n];
    for l in 1..dim {
        increments(l, &mut inc);
        let mut level = 0.0;
        for (k, dx) in inc.iter().enumerate() {
            level += dx;
            values[(k + 1) * dim + l] = level;
        }
    }
    DrivingPath { grid, hurst, dim, values: values.into(), seed_record: SeedRecord { seed, sampler, source_steps: n } }
}

/// Reference sampler: increments are `L z` with `L Lᵀ` the fGn covariance.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    grid: UniformGrid,
    hurst: HurstParameter,
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(grid: UniformGrid, hurst: HurstParameter) -> Result<Self> {
        let n = grid.steps();
        if n > CHOLESKY_MAX_STEPS {
            return Err(Error::Capacity(format!(
                "Cholesky sampler limited to {CHOLESKY_MAX_STEPS} steps (got {n}); use the circulant sampler"
            )));
        }
        let cov = FgnCovariance::new(hurst, grid.step_size());
        let matrix = DMatrix::from_fn(n, n, |i, j| cov.at(j as i64 - i as i64));
        let factor = match matrix.clone().cholesky() {
            Some(c) => c.unpack(),
            None => {
                let jitter = 1e-12 * matrix.trace() / n as f64;
                let shifted = matrix + DMatrix::identity(n, n) * jitter;
                shifted
                    .cholesky()
                    .ok_or_else(|| {
                        Error::Internal(format!("fGn covariance not positive definite (H={}, n={n})", hurst.value()))
                    })?
                    .unpack()
            }
        };
        Ok(Self { grid, hurst, factor })
    }

    pub fn sample(&self, dim: usize, seed: u64) -> Result<DrivingPath> {
        if dim == 0 {
            return Err(Error::domain("driver dimension must be at least 1"));
        }
        let n = self.grid.steps();
        let mut z = vec![0.0; n];
        Ok(assemble_path(self.grid, self.hurst, dim, seed, SamplerKind::Cholesky, |l, out| {
            let mut rng = coordinate_rng(seed, l);
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..=i).map(|j| self.factor[(i, j)] * z[j]).sum();
            }
        }))
    }
}

/// Davies–Harte sampler. The fGn covariance is embedded in a circulant matrix
/// of size `M = 2^⌈log₂ 2n⌉` whose eigenvalues are obtained by one FFT.
#[derive(Clone)]
pub struct CirculantSampler {
    grid: UniformGrid,
    hurst: HurstParameter,
    /// `sqrt(λ_j / M)` for each circulant eigenvalue.
    scales: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("embedding", &self.scales.len())
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(grid: UniformGrid, hurst: HurstParameter) -> Result<Self> {
        let n = grid.steps();
        let size = (2 * n).next_power_of_two();
        let half = size / 2;
        let cov = FgnCovariance::new(hurst, grid.step_size());
        let mut buf: Vec<Complex<f64>> = (0..size)
            .map(|j| {
                let lag = if j <= half { j } else { size - j };
                Complex::new(cov.at(lag as i64), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut buf);

        let max = buf.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-10 * max;
        let mut scales = Vec::with_capacity(size);
        for (j, c) in buf.iter().enumerate() {
            let lambda = c.re;
            if lambda < -tol {
                return Err(Error::Internal(format!(
                    "circulant embedding failed: eigenvalue {j} = {lambda:e} (H={}, n={n})",
                    hurst.value()
                )));
            }
            scales.push((lambda.max(0.0) / size as f64).sqrt());
        }
        Ok(Self { grid, hurst, scales, fft })
    }

    pub fn embedding_size(&self) -> usize {
        self.scales.len()
    }

    pub fn sample(&self, dim: usize, seed: u64) -> Result<DrivingPath> {
        if dim == 0 {
            return Err(Error::domain("driver dimension must be at least 1"));
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.scales.len()];
        Ok(assemble_path(self.grid, self.hurst, dim, seed, SamplerKind::Circulant, |l, out| {
            let mut rng = coordinate_rng(seed, l);
            for (w, s) in buf.iter_mut().zip(&self.scales) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *w = Complex::new(s * re, s * im);
            }
            self.fft.process(&mut buf);
            for (o, w) in out.iter_mut().zip(&buf) {
                *o = w.re;
            }
        }))
    }
}

/// A prepared sampler of either kind, reusable across many seeds.
#[derive(Debug, Clone)]
pub enum PathSampler {
    Cholesky(CholeskySampler),
    Circulant(CirculantSampler),
}

impl PathSampler {
    pub fn new(kind: SamplerKind, grid: UniformGrid, hurst: HurstParameter) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Cholesky => PathSampler::Cholesky(CholeskySampler::new(grid, hurst)?),
            SamplerKind::Circulant => PathSampler::Circulant(CirculantSampler::new(grid, hurst)?),
        })
    }

    pub fn sample(&self, dim: usize, seed: u64) -> Result<DrivingPath> {
        match self {
            PathSampler::Cholesky(s) => s.sample(dim, seed),
            PathSampler::Circulant(s) => s.sample(dim, seed),
        }
    }
}

pub fn sample_path_cholesky(grid: UniformGrid, dim: usize, hurst: HurstParameter, seed: u64) -> Result<DrivingPath> {
    CholeskySampler::new(grid, hurst)?.sample(dim, seed)
}

pub fn sample_path_circulant(grid: UniformGrid, dim: usize, hurst: HurstParameter, seed: u64) -> Result<DrivingPath> {
    CirculantSampler::new(grid, hurst)?.sample(dim, seed)
}

pub fn sample_path(
    kind: SamplerKind,
    grid: UniformGrid,
    dim: usize,
    hurst: HurstParameter,
    seed: u64,
) -> Result<DrivingPath> {
    PathSampler::new(kind, grid, hurst)?.sample(dim, seed)
}

/// Copies the nodes `0, factor, 2·factor, …` of `path` onto the coarse grid.
pub fn restrict(path: &DrivingPath, factor: usize) -> Result<DrivingPath> {
    let n = path.grid.steps();
    if factor == 0 || !n.is_multiple_of(factor) {
        return Err(Error::domain(format!("restriction factor {factor} does not divide {n} steps")));
    }
    if factor == 1 {
        return Ok(path.clone());
    }
    let coarse = UniformGrid::new(path.grid.horizon(), n / factor)?;
    let d = path.dim;
    let mut values = Vec::with_capacity((coarse.steps() + 1) * d);
    for k in 0..=coarse.steps() {
        values.extend_from_slice(path.row(k * factor));
    }
    // Shared nodes keep their fine-grid values, and k·factor·h equals the
    // coarse node k·T/(n/factor) only up to rounding, so re-stamp the time column.
    for k in 0..=coarse.steps() {
        values[k * d] = coarse.node(k);
    }
    Ok(DrivingPath { grid: coarse, hurst: path.hurst, dim: d, values: values.into(), seed_record: path.seed_record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParameter {
        HurstParameter::new(v).unwrap()
    }

    #[test]
    fn hurst_ranges() {
        assert!(HurstParameter::new(0.5).is_err());
        assert!(HurstParameter::new(1.0).is_err());
        assert!(HurstParameter::new(0.3).is_err());
        let s = HurstParameter::sampling_only(0.3).unwrap();
        assert!(s.is_sampling_only());
        assert!(HurstParameter::sampling_only(0.0).is_err());
        assert!(HurstParameter::sampling_only(1.2).is_err());
        assert!(!HurstParameter::sampling_only(0.7).unwrap().is_sampling_only());
    }

    #[test]
    fn grid_nodes_are_exact() {
        let g = UniformGrid::new(1.0, 10).unwrap();
        for k in 0..=10 {
            assert_eq!(g.node(k), k as f64 * 1.0 / 10.0);
        }
        assert_eq!(g.node(10), 1.0);
        assert!(UniformGrid::new(1.0, 0).is_err());
        assert!(UniformGrid::new(0.0, 4).is_err());
    }

    #[test]
    fn covariance_examples() {
        assert_relative_eq!(fbm_covariance(1.0, 1.0, h(0.75)).unwrap(), 1.0, epsilon = 1e-15);
        let bm = HurstParameter::sampling_only(0.5).unwrap();
        assert_relative_eq!(fbm_covariance(1.0, 2.0, bm).unwrap(), 1.0, epsilon = 1e-15);
        // (0.5^1.4 + 1.5^1.4 − 1) / 2, evaluated independently.
        assert_relative_eq!(fbm_covariance(0.5, 1.5, h(0.7)).unwrap(), 0.5715238377073049, epsilon = 1e-14);
        assert!(fbm_covariance(-0.1, 1.0, h(0.7)).is_err());
    }

    #[test]
    fn fgn_covariance_matches_levels() {
        let hp = h(0.65);
        let step = 0.25;
        let cov = FgnCovariance::new(hp, step);
        assert_relative_eq!(cov.at(0), step.powf(1.3), epsilon = 1e-15);
        for k in 0..6i64 {
            assert_eq!(cov.at(k), cov.at(-k));
            // Cov(B_{t1} − B_{t0}, B_{t_{k+1}} − B_{t_k}) from the level covariance.
            let r = |a: f64, b: f64| fbm_covariance(a, b, hp).unwrap();
            let (t0, t1) = (0.0, step);
            let (s0, s1) = (k as f64 * step, (k + 1) as f64 * step);
            let expect = r(t1, s1) - r(t1, s0) - r(t0, s1) + r(t0, s0);
            assert_relative_eq!(cov.at(k), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn path_invariants() {
        let g = UniformGrid::new(2.0, 16).unwrap();
        for kind in [SamplerKind::Cholesky, SamplerKind::Circulant] {
            let p = sample_path(kind, g, 3, h(0.7), 11).unwrap();
            assert!(p.row(0).iter().all(|&v| v == 0.0));
            for k in 0..=16 {
                assert_eq!(p.value(k, 0), g.node(k));
            }
            assert_eq!(p, sample_path(kind, g, 3, h(0.7), 11).unwrap());
            assert_ne!(p.value(16, 1), p.value(16, 2));
        }
    }

    #[test]
    fn time_only_driver() {
        let g = UniformGrid::new(1.0, 8).unwrap();
        let p = sample_path_circulant(g, 1, h(0.8), 3).unwrap();
        assert_eq!(p.values().len(), 9);
        let q = sample_path_cholesky(g, 1, h(0.8), 99).unwrap();
        assert_eq!(p.values(), q.values());
    }

    #[test]
    fn adding_coordinates_keeps_existing_ones() {
        let g = UniformGrid::new(1.0, 32).unwrap();
        let p2 = sample_path_circulant(g, 2, h(0.7), 5).unwrap();
        let p4 = sample_path_circulant(g, 4, h(0.7), 5).unwrap();
        for k in 0..=32 {
            assert_eq!(p2.value(k, 1), p4.value(k, 1));
        }
    }

    #[test]
    fn embedding_size_is_power_of_two() {
        for (n, m) in [(1, 2), (3, 8), (8, 16), (100, 256), (256, 512)] {
            let g = UniformGrid::new(1.0, n).unwrap();
            assert_eq!(CirculantSampler::new(g, h(0.8)).unwrap().embedding_size(), m);
        }
    }

    #[test]
    fn cholesky_capacity_guard() {
        let g = UniformGrid::new(1.0, CHOLESKY_MAX_STEPS + 1).unwrap();
        assert!(matches!(CholeskySampler::new(g, h(0.7)), Err(Error::Capacity(_))));
    }

    #[test]
    fn restriction() {
        let g = UniformGrid::new(1.0, 8).unwrap();
        let p = sample_path_circulant(g, 2, h(0.7), 1).unwrap();
        assert_eq!(restrict(&p, 1).unwrap(), p);
        let c = restrict(&p, 2).unwrap();
        assert_eq!(c.grid().steps(), 4);
        for k in 0..=4 {
            assert_eq!(c.value(k, 1).to_bits(), p.value(2 * k, 1).to_bits());
        }
        assert_eq!(restrict(&c, 2).unwrap(), restrict(&p, 4).unwrap());
        assert!(restrict(&p, 3).is_err());
        assert!(restrict(&p, 0).is_err());
        assert_eq!(c.seed_record(), p.seed_record());
    }

    #[test]
    fn from_levels_validates() {
        let g = UniformGrid::new(1.0, 2).unwrap();
        let rec = SeedRecord { seed: 0, sampler: SamplerKind::Circulant, source_steps: 2 };
        assert!(DrivingPath::from_levels(g, h(0.7), 2, vec![0.0, 0.0, 0.5, 0.1, 1.0, 0.2], rec).is_ok());
        assert!(DrivingPath::from_levels(g, h(0.7), 2, vec![0.0, 0.1, 0.5, 0.1, 1.0, 0.2], rec).is_err());
        assert!(DrivingPath::from_levels(g, h(0.7), 2, vec![0.0, 0.0, 0.4, 0.1, 1.0, 0.2], rec).is_err());
        assert!(DrivingPath::from_levels(g, h(0.7), 2, vec![0.0; 5], rec).is_err());
    }
}
