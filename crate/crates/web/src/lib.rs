//! Browser bindings: sample a driver path, solve a builtin problem, and run a
//! small convergence study. Each export returns a JSON string.
//!
//! The exported functions are thin wrappers over plain Rust functions so the
//! logic is testable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fbmsde::analysis::{convergence_study, ConvergenceReport, StudyConfig};
use fbmsde::fbm::sample_path;
use fbmsde::schemes::integrate;
use fbmsde::{builtin_problem, HurstParameter, SamplerKind, Scheme, SolverConfig, UniformGrid};

/// Grid sizes are capped so a click cannot freeze the tab.
const MAX_STEPS: usize = 1 << 14;
const MAX_STUDY_WORK: usize = 1 << 22;

#[derive(Serialize)]
struct Series {
    t: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Solution {
    problem: String,
    scheme: String,
    driver: Series,
    solution: Series,
    max_stage_iterations: u32,
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn check_steps(steps: usize) -> Result<(), String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must lie in 1..={MAX_STEPS}"));
    }
    Ok(())
}

fn sampler(name: &str) -> Result<SamplerKind, String> {
    name.parse().map_err(err)
}

pub fn sample_json(hurst: f64, steps: usize, dim: usize, seed: u64, sampler_name: &str) -> Result<String, String> {
    check_steps(steps)?;
    let grid = UniformGrid::new(1.0, steps).map_err(err)?;
    let h = HurstParameter::new(hurst).map_err(err)?;
    let path = sample_path(sampler(sampler_name)?, grid, dim, h, seed).map_err(err)?;
    let series = Series {
        t: grid.nodes().collect(),
        columns: (1..dim).map(|l| (0..=steps).map(|k| path.value(k, l)).collect()).collect(),
    };
    serde_json::to_string(&series).map_err(err)
}

pub fn solve_json(problem: &str, scheme: &str, hurst: f64, steps: usize, seed: u64) -> Result<String, String> {
    check_steps(steps)?;
    let problem = builtin_problem(problem).map_err(err)?;
    let scheme = Scheme::builtin(scheme).map_err(err)?;
    let h = HurstParameter::new(hurst).map_err(err)?;
    let grid = UniformGrid::new(problem.horizon(), steps).map_err(err)?;
    let path = sample_path(SamplerKind::Circulant, grid, problem.driver_dim(), h, seed).map_err(err)?;
    let traj = integrate(&problem, &path, &scheme, &SolverConfig::default()).map_err(err)?;
    let t: Vec<f64> = grid.nodes().collect();
    let out = Solution {
        problem: problem.name().to_string(),
        scheme: scheme.id(),
        driver: Series {
            t: t.clone(),
            columns: (1..path.dim()).map(|l| (0..=steps).map(|k| path.value(k, l)).collect()).collect(),
        },
        solution: Series { t, columns: (0..traj.state_dim()).map(|q| traj.component(q)).collect() },
        max_stage_iterations: traj.stage_iterations().iter().copied().max().unwrap_or(0),
    };
    serde_json::to_string(&out).map_err(err)
}

#[allow(clippy::too_many_arguments)]
pub fn converge_json(
    problem: &str,
    scheme: &str,
    hurst: f64,
    min_level: u32,
    max_level: u32,
    ref_level: u32,
    paths: usize,
    seed: u64,
) -> Result<String, String> {
    if max_level >= ref_level || ref_level > 14 || min_level + 2 > max_level {
        return Err("need min_level + 2 <= max_level < ref_level <= 14".into());
    }
    // Reference plus coarse levels: under 2 · 2^ref_level integrations per path.
    if paths.saturating_mul(2 << ref_level) > MAX_STUDY_WORK {
        return Err(format!(
            "study too large for the browser: paths · 2^(ref_level+1) must stay below {MAX_STUDY_WORK}"
        ));
    }
    let problem = builtin_problem(problem).map_err(err)?;
    let scheme = Scheme::builtin(scheme).map_err(err)?;
    let cfg = StudyConfig {
        levels: (min_level..=max_level).map(|p| 1usize << p).collect(),
        ref_steps: 1 << ref_level,
        paths,
        ..StudyConfig::desk(HurstParameter::new(hurst).map_err(err)?, seed)
    };
    let report: ConvergenceReport = convergence_study(&problem, &scheme, &cfg).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// `{t, columns}` with one column per fBm coordinate.
#[wasm_bindgen]
pub fn sample(hurst: f64, steps: usize, dim: usize, seed: u32, sampler: &str) -> Result<String, JsError> {
    sample_json(hurst, steps, dim, seed.into(), sampler).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve(problem: &str, scheme: &str, hurst: f64, steps: usize, seed: u32) -> Result<String, JsError> {
    solve_json(problem, scheme, hurst, steps, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn converge(
    problem: &str,
    scheme: &str,
    hurst: f64,
    min_level: u32,
    max_level: u32,
    ref_level: u32,
    paths: usize,
    seed: u32,
) -> Result<String, JsError> {
    converge_json(problem, scheme, hurst, min_level, max_level, ref_level, paths, seed.into())
        .map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn sample_shape() {
        let v: Value = serde_json::from_str(&sample_json(0.7, 8, 3, 1, "circulant").unwrap()).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), 9);
        assert_eq!(v["columns"].as_array().unwrap().len(), 2);
        assert_eq!(v["columns"][0][0], 0.0);
        assert!(sample_json(0.3, 8, 2, 1, "circulant").is_err());
        assert!(sample_json(0.7, 8, 2, 1, "fft").is_err());
        assert!(sample_json(0.7, MAX_STEPS + 1, 2, 1, "circulant").is_err());
    }

    #[test]
    fn solve_matches_library() {
        let v: Value = serde_json::from_str(&solve_json("paper5", "rk4", 0.7, 64, 3).unwrap()).unwrap();
        let problem = builtin_problem("paper5").unwrap();
        let path = sample_path(
            SamplerKind::Circulant,
            UniformGrid::new(1.0, 64).unwrap(),
            3,
            HurstParameter::new(0.7).unwrap(),
            3,
        )
        .unwrap();
        let traj = integrate(&problem, &path, &Scheme::builtin("rk4").unwrap(), &SolverConfig::default()).unwrap();
        assert_eq!(v["solution"]["columns"][0][64].as_f64().unwrap(), traj.last()[0]);
        assert_eq!(v["driver"]["columns"].as_array().unwrap().len(), 2);
        assert!(solve_json("paper5", "rk9", 0.7, 64, 3).unwrap_err().contains("step2"));
    }

    #[test]
    fn small_study() {
        let v: Value = serde_json::from_str(&converge_json("paper5", "step2", 0.8, 3, 5, 8, 8, 1).unwrap()).unwrap();
        assert_eq!(v["levels"].as_array().unwrap().len(), 3);
        assert!(v["slope"].as_f64().unwrap().is_finite());
        assert!(converge_json("paper5", "step2", 0.8, 3, 4, 8, 8, 1).is_err());
        assert!(converge_json("paper5", "step2", 0.8, 3, 6, 14, 10_000, 1).is_err());
    }
}
