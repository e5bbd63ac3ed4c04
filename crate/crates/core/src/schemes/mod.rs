//! One-step integrators on a fixed driving path.

mod rk;
mod step_n;
mod tableau;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use rk::{rk_step, RkStepper, SolverConfig, StepOutcome};
pub use step_n::{check_step_n_capability, step_n_euler_step, MAX_STEP_N_ORDER};
pub use tableau::{check_order_conditions, ButcherTableau, OrderConditionReport, ORDER_CONDITION_TOL};

use crate::error::{Error, Result};
use crate::fbm::{DrivingPath, HurstParameter, SeedRecord, UniformGrid};
use crate::problem::{CommutativityClass, SdeProblem};

pub const BUILTIN_SCHEMES: [&str; 6] = ["euler", "heun", "midpoint", "rk4", "step2", "step3"];

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    RungeKutta(ButcherTableau),
    /// Simplified step-N Euler scheme of the given order.
    StepN(usize),
}

impl Scheme {
    pub fn builtin(name: &str) -> Result<Self> {
        if let Some(tab) = ButcherTableau::builtin(name) {
            return Ok(Scheme::RungeKutta(tab));
        }
        match name.strip_prefix("step").and_then(|n| n.parse::<usize>().ok()) {
            Some(order @ 2..=MAX_STEP_N_ORDER) => Ok(Scheme::StepN(order)),
            _ => Err(Error::domain(format!("unknown scheme '{name}'; builtins: {}", BUILTIN_SCHEMES.join(", ")))),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Scheme::RungeKutta(t) => t.name().to_string(),
            Scheme::StepN(n) => format!("step{n}"),
        }
    }

    /// Whether the scheme meets the conditions for strong rate `2H − 1/2`.
    /// Step-N schemes with `N ≥ 2` always do.
    pub fn meets_rate_conditions(&self) -> bool {
        match self {
            Scheme::RungeKutta(t) => check_order_conditions(t).satisfies_order_conditions,
            Scheme::StepN(n) => *n >= 2,
        }
    }

    /// Expected strong convergence rate for a driver of dimension `d`.
    ///
    /// With `d = 1` the equation is an ODE and the classical order applies.
    /// Otherwise a scheme meeting the rate conditions converges with
    /// `2H − 1/2`, raised to `H + 1/2` when the fBm columns commute and to
    /// `2H` when all columns commute. A consistent method failing them
    /// (explicit Euler) only reaches `2H − 1`.
    pub fn target_rate(&self, hurst: HurstParameter, d: usize, class: CommutativityClass) -> f64 {
        let h = hurst.value();
        if d == 1 {
            return match self {
                Scheme::RungeKutta(t) => t.classical_order() as f64,
                Scheme::StepN(n) => *n as f64,
            };
        }
        if !self.meets_rate_conditions() {
            return 2.0 * h - 1.0;
        }
        match class {
            CommutativityClass::Noncommutative => 2.0 * h - 0.5,
            CommutativityClass::DiffusionCommutative => h + 0.5,
            CommutativityClass::FullyCommutative => 2.0 * h,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Numerical solution on the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    grid: UniformGrid,
    state_dim: usize,
    /// Row-major `(n+1) × m`.
    states: Vec<f64>,
    scheme_id: String,
    /// Fixed-point sweeps per step; empty for explicit schemes.
    stage_iterations: Vec<u32>,
    seed_record: SeedRecord,
}

impl Trajectory {
    pub fn new(
        grid: UniformGrid,
        state_dim: usize,
        states: Vec<f64>,
        scheme_id: impl Into<String>,
        seed_record: SeedRecord,
    ) -> Result<Self> {
        if states.len() != (grid.steps() + 1) * state_dim {
            return Err(Error::domain("trajectory size does not match grid and state dimension"));
        }
        Ok(Self { grid, state_dim, states, scheme_id: scheme_id.into(), stage_iterations: Vec::new(), seed_record })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.state_dim..(k + 1) * self.state_dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    pub fn scheme_id(&self) -> &str {
        &self.scheme_id
    }

    pub fn stage_iterations(&self) -> &[u32] {
        &self.stage_iterations
    }

    pub fn seed_record(&self) -> SeedRecord {
        self.seed_record
    }

    /// Values of state component `q` at every node.
    pub fn component(&self, q: usize) -> Vec<f64> {
        self.states.iter().skip(q).step_by(self.state_dim).copied().collect()
    }
}

/// Applies the scheme along every increment of `path`.
pub fn integrate(problem: &SdeProblem, path: &DrivingPath, scheme: &Scheme, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let field = problem.field();
    let (m, d) = (field.state_dim(), field.driver_dim());
    if path.dim() != d {
        return Err(Error::domain(format!("path has {} coordinates, problem needs {d}", path.dim())));
    }
    if path.grid().horizon() != problem.horizon() {
        return Err(Error::domain(format!(
            "path horizon {} differs from problem horizon {}",
            path.grid().horizon(),
            problem.horizon()
        )));
    }
    let n = path.grid().steps();
    let mut states = vec![0.0; (n + 1) * m];
    states[..m].copy_from_slice(problem.y0());
    let mut dx = vec![0.0; d];
    let mut iterations = Vec::new();
    let at = |step: usize| move |e: Error| Error::AtStep { step, source: Box::new(e) };

    match scheme {
        Scheme::RungeKutta(tab) => {
            let mut stepper = RkStepper::new(tab, field, *cfg);
            if !tab.is_explicit() {
                iterations.reserve(n);
            }
            for k in 0..n {
                path.increment_into(k, &mut dx);
                let (done, rest) = states.split_at_mut((k + 1) * m);
                let it = stepper.step(&done[k * m..], &dx, &mut rest[..m]).map_err(at(k))?;
                if !tab.is_explicit() {
                    iterations.push(it as u32);
                }
            }
        }
        Scheme::StepN(order) => {
            check_step_n_capability(field, *order, problem.y0())?;
            for k in 0..n {
                path.increment_into(k, &mut dx);
                let next = step_n_euler_step(field, &states[k * m..(k + 1) * m], &dx, *order).map_err(at(k))?;
                let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm <= cfg.divergence_guard) {
                    return Err(at(k)(Error::Divergence { norm }));
                }
                states[(k + 1) * m..(k + 2) * m].copy_from_slice(&next);
            }
        }
    }

    Ok(Trajectory {
        grid: *path.grid(),
        state_dim: m,
        states,
        scheme_id: scheme.id(),
        stage_iterations: iterations,
        seed_record: path.seed_record(),
    })
}

/// Piecewise-linear interpolation of the node values; exact at nodes.
pub fn interpolate_linear(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    let grid = traj.grid();
    if !(t >= 0.0 && t <= grid.horizon()) {
        return Err(Error::domain(format!("time {t} outside [0, {}]", grid.horizon())));
    }
    let n = grid.steps();
    let mut k = ((t / grid.step_size()).floor() as usize).min(n);
    if grid.node(k) > t {
        k -= 1;
    }
    if grid.node(k) == t || k == n {
        return Ok(traj.state(k).to_vec());
    }
    let w = (t - grid.node(k)) / grid.step_size();
    Ok(traj.state(k).iter().zip(traj.state(k + 1)).map(|(a, b)| a + w * (b - a)).collect())
}
