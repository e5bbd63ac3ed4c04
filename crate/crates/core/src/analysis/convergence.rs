//! Monte Carlo strong-convergence study.
//!
//! For every sample path the driver is simulated once on the reference grid,
//! the reference solution is computed there, and the same realization is
//! restricted to each coarse level. The pathwise maximum error is aggregated
//! into `MMSE = sqrt(mean(max_k |Y_ref(t_k) − Y_n(t_k)|²))` and the slope of
//! `log₂ MMSE` against `log₂ h` is fitted by least squares.

use serde::{Deserialize, Serialize};

use super::fit::fit_loglog_slope;
use super::strong::{strong_error, ErrorMode};
use super::{compensated_sum, map_indexed};
use crate::error::{Error, Result};
use crate::fbm::{HurstParameter, PathSampler, SamplerKind, UniformGrid};
use crate::problem::{classify_commutativity, random_probe_points, CommutativityReport, SdeProblem};
use crate::rng::derive_seed;
use crate::schemes::{integrate, Scheme, SolverConfig};

/// A study fails when more than this fraction of paths had to be resampled.
pub const MAX_RESAMPLE_FRACTION: f64 = 0.05;

const PROBE_POINTS: usize = 100;
const PROBE_RADIUS: f64 = 10.0;
const PROBE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub hurst: HurstParameter,
    /// Coarse step counts; each must divide `ref_steps`.
    pub levels: Vec<usize>,
    pub ref_steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// Scheme for the reference solution; the studied scheme when `None`.
    pub ref_scheme: Option<Scheme>,
    pub mode: ErrorMode,
    pub solver: SolverConfig,
}

impl StudyConfig {
    /// Levels `2^4 … 2^9`, reference `2^12`, 200 paths.
    pub fn desk(hurst: HurstParameter, seed: u64) -> Self {
        Self {
            hurst,
            levels: (4..=9).map(|p| 1usize << p).collect(),
            ref_steps: 1 << 12,
            paths: 200,
            seed,
            sampler: SamplerKind::Circulant,
            ref_scheme: None,
            mode: ErrorMode::Nodes,
            solver: SolverConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(Error::domain(format!("need at least 3 levels for a slope, got {}", self.levels.len())));
        }
        if self.paths < 2 {
            return Err(Error::domain("need at least 2 sample paths"));
        }
        for &n in &self.levels {
            if n == 0 || !self.ref_steps.is_multiple_of(n) || n >= self.ref_steps {
                return Err(Error::domain(format!(
                    "level {n} must be smaller than and divide the reference step count {}",
                    self.ref_steps
                )));
            }
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub n: usize,
    pub h: f64,
    pub mmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub hurst: f64,
    pub scheme: String,
    pub ref_scheme: String,
    pub ref_steps: usize,
    pub mode: ErrorMode,
    pub paths: usize,
    pub seed: u64,
    pub levels: Vec<LevelError>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub target_rate: f64,
    pub commutativity: CommutativityReport,
    /// Number of paths replaced after an integration failure.
    pub resampled: usize,
}

impl ConvergenceReport {
    /// `h,mmse` lines for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,mmse\n");
        for l in &self.levels {
            out.push_str(&format!("{},{}\n", l.h, l.mmse));
        }
        out
    }

    pub fn slope_within(&self, tol: f64) -> bool {
        (self.slope - self.target_rate).abs() <= tol
    }
}

/// Errors at every level for the path with the given seed.
fn path_errors(
    problem: &SdeProblem,
    scheme: &Scheme,
    ref_scheme: &Scheme,
    sampler: &PathSampler,
    cfg: &StudyConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let path = sampler.sample(problem.driver_dim(), seed)?;
    let reference = integrate(problem, &path, ref_scheme, &cfg.solver)?;
    cfg.levels
        .iter()
        .map(|&n| {
            let coarse = integrate(problem, &path.restrict(cfg.ref_steps / n)?, scheme, &cfg.solver)?;
            Ok(strong_error(&reference, &coarse)?.value(cfg.mode))
        })
        .collect()
}

pub fn convergence_study(problem: &SdeProblem, scheme: &Scheme, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let ref_scheme = cfg.ref_scheme.clone().unwrap_or_else(|| scheme.clone());
    let grid = UniformGrid::new(problem.horizon(), cfg.ref_steps)?;
    let sampler = PathSampler::new(cfg.sampler, grid, cfg.hurst)?;
    let allowed = (MAX_RESAMPLE_FRACTION * cfg.paths as f64).floor() as usize;

    // Each path retries with fresh substreams; the retry budget per path is
    // the study-wide budget, which is checked after aggregation.
    let outcomes: Vec<Result<(Vec<f64>, usize)>> = map_indexed(cfg.paths, |p| {
        let mut last_err = None;
        for attempt in 0..=allowed {
            let seed = derive_seed(cfg.seed, &[p as u64, attempt as u64]);
            match path_errors(problem, scheme, &ref_scheme, &sampler, cfg, seed) {
                Ok(errs) => return Ok((errs, attempt)),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    });

    let mut per_path = Vec::with_capacity(cfg.paths);
    let mut resampled = 0;
    for (p, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((errs, attempts)) => {
                resampled += attempts;
                per_path.push(errs);
            }
            Err(e) => {
                return Err(Error::StudyFailed(format!("path {p} failed on every resample (allowed {allowed}): {e}")))
            }
        }
    }
    if resampled > allowed {
        return Err(Error::StudyFailed(format!(
            "{resampled} of {} paths resampled after integration failures (limit {:.0}%); refine the grid",
            cfg.paths,
            MAX_RESAMPLE_FRACTION * 100.0
        )));
    }

    let mut levels = Vec::with_capacity(cfg.levels.len());
    for (i, &n) in cfg.levels.iter().enumerate() {
        let mean_sq = compensated_sum(per_path.iter().map(|e| e[i] * e[i])) / cfg.paths as f64;
        let mmse = mean_sq.sqrt();
        if !(mmse > 0.0) {
            return Err(Error::StudyFailed(format!(
                "MMSE at level n={n} is {mmse}; coarse and reference agree exactly"
            )));
        }
        levels.push(LevelError { n, h: problem.horizon() / n as f64, mmse });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let ms: Vec<f64> = levels.iter().map(|l| l.mmse).collect();
    let fit = fit_loglog_slope(&hs, &ms)?;

    let points = random_probe_points(problem.state_dim(), PROBE_POINTS, PROBE_RADIUS, cfg.seed);
    let commutativity = classify_commutativity(problem.field(), &points, PROBE_TOL)?;
    let target_rate = scheme.target_rate(cfg.hurst, problem.driver_dim(), commutativity.class);

    Ok(ConvergenceReport {
        problem: problem.name().to_string(),
        hurst: cfg.hurst.value(),
        scheme: scheme.id(),
        ref_scheme: ref_scheme.id(),
        ref_steps: cfg.ref_steps,
        mode: cfg.mode,
        paths: cfg.paths,
        seed: cfg.seed,
        levels,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        target_rate,
        commutativity,
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;

    fn small(hurst: f64) -> StudyConfig {
        StudyConfig {
            levels: vec![8, 16, 32, 64],
            ref_steps: 512,
            paths: 16,
            ..StudyConfig::desk(HurstParameter::new(hurst).unwrap(), 9)
        }
    }

    #[test]
    fn validation() {
        let p = builtin_problem("paper5").unwrap();
        let s = Scheme::builtin("rk4").unwrap();
        let mut cfg = small(0.7);
        cfg.levels = vec![16];
        assert!(convergence_study(&p, &s, &cfg).is_err());
        let mut cfg = small(0.7);
        cfg.levels = vec![8, 16, 24];
        assert!(convergence_study(&p, &s, &cfg).is_err());
        let mut cfg = small(0.7);
        cfg.paths = 1;
        assert!(convergence_study(&p, &s, &cfg).is_err());
    }

    #[test]
    fn report_is_reproducible() {
        let p = builtin_problem("paper5").unwrap();
        let s = Scheme::builtin("step2").unwrap();
        let a = convergence_study(&p, &s, &small(0.8)).unwrap();
        let b = convergence_study(&p, &s, &small(0.8)).unwrap();
        assert_eq!(a, b);
        assert!((a.target_rate - 1.1).abs() < 1e-12);
        assert!(a.levels.iter().all(|l| l.mmse > 0.0 && l.mmse.is_finite()));
        assert_eq!(a.resampled, 0);
        assert!(a.to_csv().starts_with("h,mmse\n0.125,"));
    }

    #[test]
    fn two_paths_run() {
        let p = builtin_problem("paper5").unwrap();
        let s = Scheme::builtin("rk4").unwrap();
        let cfg = StudyConfig { paths: 2, ..small(0.7) };
        let r = convergence_study(&p, &s, &cfg).unwrap();
        assert_eq!(r.paths, 2);
        assert!(r.slope_stderr.is_finite());
    }

    #[test]
    fn interpolated_mode_dominates_nodes() {
        let p = builtin_problem("paper5").unwrap();
        let s = Scheme::builtin("rk4").unwrap();
        let nodes = convergence_study(&p, &s, &small(0.7)).unwrap();
        let interp = convergence_study(&p, &s, &StudyConfig { mode: ErrorMode::Interp, ..small(0.7) }).unwrap();
        for (a, b) in nodes.levels.iter().zip(&interp.levels) {
            assert!(b.mmse >= a.mmse);
        }
    }

    #[test]
    fn failing_paths_abort_the_study() {
        let p = builtin_problem("paper5").unwrap();
        let s = Scheme::builtin("midpoint").unwrap();
        let cfg = StudyConfig { solver: SolverConfig { fp_max_iter: 1, ..SolverConfig::default() }, ..small(0.7) };
        assert!(matches!(convergence_study(&p, &s, &cfg), Err(Error::StudyFailed(_))));
    }
}
