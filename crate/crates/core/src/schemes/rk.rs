//! One step of an s-stage Runge–Kutta method driven by an increment `ΔX`:
//!
//! ```text
//! Z_i    = y + Σ_j a_ij V(Z_j) ΔX
//! y_next = y + Σ_i b_i V(Z_i) ΔX
//! ```
//!
//! Explicit tableaus are solved by forward substitution. Implicit ones use
//! plain fixed-point iteration started at `Z_i = y`; the iterate reached from
//! `y` is taken as the solution even when the stage equation has several.

use serde::{Deserialize, Serialize};

use super::tableau::ButcherTableau;
use crate::error::{Error, Result};
use crate::problem::VectorField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute tolerance on the change of the stage values between sweeps.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Abort when any stage value exceeds this norm.
    pub divergence_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { fp_tol: 1e-12, fp_max_iter: 100, divergence_guard: 1e8 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 || !(self.divergence_guard > 0.0) {
            return Err(Error::domain(
                "solver config needs fp_tol > 0, fp_max_iter ≥ 1 and a positive divergence guard",
            ));
        }
        Ok(())
    }
}

/// Writes `V(z) ΔX = Σ_l V_l(z) ΔX^l` into `out` using `scratch` (`m·d`).
pub(crate) fn contract(field: &dyn VectorField, z: &[f64], dx: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    let m = out.len();
    field.eval(z, scratch);
    out.iter_mut().for_each(|o| *o = 0.0);
    for (l, dxl) in dx.iter().enumerate() {
        if *dxl == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(&scratch[l * m..(l + 1) * m]) {
            *o += v * dxl;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Reusable buffers for repeated steps with one tableau and field.
pub struct RkStepper<'a> {
    tab: &'a ButcherTableau,
    field: &'a dyn VectorField,
    cfg: SolverConfig,
    m: usize,
    stages: Vec<f64>,
    next: Vec<f64>,
    slopes: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> RkStepper<'a> {
    pub fn new(tab: &'a ButcherTableau, field: &'a dyn VectorField, cfg: SolverConfig) -> Self {
        let (m, s) = (field.state_dim(), tab.stages());
        Self {
            tab,
            field,
            cfg,
            m,
            stages: vec![0.0; s * m],
            next: vec![0.0; s * m],
            slopes: vec![0.0; s * m],
            scratch: vec![0.0; m * field.driver_dim()],
        }
    }

    /// Stage values of the last successful step, stage-major.
    pub fn stage_values(&self) -> &[f64] {
        &self.stages
    }

    fn guard(&self, z: &[f64]) -> Result<()> {
        let n = norm(z);
        if !(n <= self.cfg.divergence_guard) {
            return Err(Error::Divergence { norm: n });
        }
        Ok(())
    }

    /// Advances `y` by one step into `out`; returns the number of sweeps.
    pub fn step(&mut self, y: &[f64], dx: &[f64], out: &mut [f64]) -> Result<usize> {
        let (m, s) = (self.m, self.tab.stages());
        let iterations = if self.tab.is_explicit() {
            for i in 0..s {
                let zi = &mut self.stages[i * m..(i + 1) * m];
                zi.copy_from_slice(y);
                for j in 0..i {
                    let a = self.tab.a(i, j);
                    if a != 0.0 {
                        for (z, k) in zi.iter_mut().zip(&self.slopes[j * m..(j + 1) * m]) {
                            *z += a * k;
                        }
                    }
                }
                self.guard(&self.stages[i * m..(i + 1) * m])?;
                contract(
                    self.field,
                    &self.stages[i * m..(i + 1) * m],
                    dx,
                    &mut self.scratch,
                    &mut self.slopes[i * m..(i + 1) * m],
                );
            }
            1
        } else {
            self.solve_implicit(y, dx)?
        };
        out.copy_from_slice(y);
        for (i, &b) in self.tab.b().iter().enumerate() {
            for (o, k) in out.iter_mut().zip(&self.slopes[i * m..(i + 1) * m]) {
                *o += b * k;
            }
        }
        self.guard(out)?;
        Ok(iterations)
    }

    fn sweep(&mut self, y: &[f64]) {
        let (m, s) = (self.m, self.tab.stages());
        for i in 0..s {
            let zi = &mut self.next[i * m..(i + 1) * m];
            zi.copy_from_slice(y);
            for j in 0..s {
                let a = self.tab.a(i, j);
                if a != 0.0 {
                    for (z, k) in zi.iter_mut().zip(&self.slopes[j * m..(j + 1) * m]) {
                        *z += a * k;
                    }
                }
            }
        }
    }

    fn update_slopes(&mut self, dx: &[f64]) -> Result<()> {
        let m = self.m;
        for i in 0..self.tab.stages() {
            self.guard(&self.stages[i * m..(i + 1) * m])?;
            contract(
                self.field,
                &self.stages[i * m..(i + 1) * m],
                dx,
                &mut self.scratch,
                &mut self.slopes[i * m..(i + 1) * m],
            );
        }
        Ok(())
    }

    fn solve_implicit(&mut self, y: &[f64], dx: &[f64]) -> Result<usize> {
        let (m, s) = (self.m, self.tab.stages());
        for i in 0..s {
            self.stages[i * m..(i + 1) * m].copy_from_slice(y);
        }
        let mut residual = f64::INFINITY;
        for iter in 1..=self.cfg.fp_max_iter {
            self.update_slopes(dx)?;
            self.sweep(y);
            residual = (0..s)
                .map(|i| {
                    let (a, b) = (&self.stages[i * m..(i + 1) * m], &self.next[i * m..(i + 1) * m]);
                    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max);
            std::mem::swap(&mut self.stages, &mut self.next);
            if !residual.is_finite() {
                return Err(Error::Divergence { norm: residual });
            }
            if residual <= self.cfg.fp_tol {
                self.update_slopes(dx)?;
                return Ok(iter);
            }
        }
        Err(Error::NonConvergence { iterations: self.cfg.fp_max_iter, residual })
    }
}

/// Result of a single Runge–Kutta step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub stages: Vec<Vec<f64>>,
    pub iterations: usize,
}

pub fn rk_step(
    tab: &ButcherTableau,
    field: &dyn VectorField,
    y: &[f64],
    dx: &[f64],
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    cfg.validate()?;
    if dx.len() != field.driver_dim() || y.len() != field.state_dim() {
        return Err(Error::domain(format!(
            "increment must have length {} and state length {}",
            field.driver_dim(),
            field.state_dim()
        )));
    }
    let mut stepper = RkStepper::new(tab, field, *cfg);
    let mut state = vec![0.0; y.len()];
    let iterations = stepper.step(y, dx, &mut state)?;
    let stages = stepper.stage_values().chunks(y.len()).map(<[f64]>::to_vec).collect();
    Ok(StepOutcome { state, stages, iterations })
}
