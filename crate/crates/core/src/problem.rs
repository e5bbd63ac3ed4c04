//! SDE problems `dY = V(Y) dX`, vector fields and their derivative oracles.
//!
//! Driver columns are indexed from zero in this API: column `0` is the time
//! coordinate (drift) and columns `1..d` are the fBm coordinates.
//!
//! The convergence theory assumes bounded fields with bounded derivatives.
//! Nothing here enforces that for user fields; the linear builtins are
//! unbounded but well behaved on the unit horizon.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::DrivingPath;
use crate::rng::coordinate_rng;

/// Relative step used by the finite-difference fallback.
pub const FD_RELATIVE_STEP: f64 = 1e-6;

/// The matrix-valued field `V: R^m → R^{m×d}`.
///
/// `eval` writes `V(y)` column-major: column `l` occupies
/// `out[l*m .. (l+1)*m]`. Derivative oracles are optional; a field without
/// them falls back to finite differences where a scheme allows it.
pub trait VectorField: Send + Sync {
    fn state_dim(&self) -> usize;

    fn driver_dim(&self) -> usize;

    fn eval(&self, y: &[f64], out: &mut [f64]);

    /// Writes the Jacobian of column `l`, row-major (`out[q*m + r] = ∂_r V_l^q`).
    /// Returns `None` when no analytic oracle exists.
    fn jacobian(&self, _y: &[f64], _l: usize, _out: &mut [f64]) -> Option<()> {
        None
    }

    /// Writes the second derivative `D²V_l(y)[u, v]`. Returns `None` when no
    /// analytic oracle exists.
    fn second_derivative(&self, _y: &[f64], _l: usize, _u: &[f64], _v: &[f64], _out: &mut [f64]) -> Option<()> {
        None
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Column `l` of `V(y)`.
pub fn column(field: &dyn VectorField, y: &[f64], l: usize) -> Vec<f64> {
    let m = field.state_dim();
    let mut buf = vec![0.0; m * field.driver_dim()];
    field.eval(y, &mut buf);
    buf[l * m..(l + 1) * m].to_vec()
}

fn directional_fd(field: &dyn VectorField, y: &[f64], l: usize, direction: &[f64]) -> Vec<f64> {
    let m = field.state_dim();
    let size = norm(direction);
    if size == 0.0 {
        return vec![0.0; m];
    }
    let eps = FD_RELATIVE_STEP * norm(y).max(1.0);
    let shifted = |sign: f64| -> Vec<f64> {
        let z: Vec<f64> = y.iter().zip(direction).map(|(yi, di)| yi + sign * eps * di / size).collect();
        column(field, &z, l)
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * eps) * size).collect()
}

/// `(∂V_l)(y) · direction`, from the analytic Jacobian when the field has one
/// and from central differences otherwise.
pub fn directional_derivative(field: &dyn VectorField, y: &[f64], l: usize, direction: &[f64]) -> Result<Vec<f64>> {
    let (m, d) = (field.state_dim(), field.driver_dim());
    if l >= d {
        return Err(Error::domain(format!("column {l} out of range for driver dimension {d}")));
    }
    if y.len() != m || direction.len() != m {
        return Err(Error::domain(format!("state and direction must have length {m}")));
    }
    let mut jac = vec![0.0; m * m];
    if field.jacobian(y, l, &mut jac).is_some() {
        return Ok((0..m).map(|q| (0..m).map(|r| jac[q * m + r] * direction[r]).sum()).collect());
    }
    Ok(directional_fd(field, y, l, direction))
}

/// Central-difference Jacobian of column `l`, row-major.
pub fn jacobian_fd(field: &dyn VectorField, y: &[f64], l: usize) -> Vec<f64> {
    let m = field.state_dim();
    let mut jac = vec![0.0; m * m];
    let mut e = vec![0.0; m];
    for r in 0..m {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[r] = 1.0;
        let col = directional_fd(field, y, l, &e);
        for q in 0..m {
            jac[q * m + r] = col[q];
        }
    }
    jac
}

/// Largest relative discrepancy between the analytic Jacobian and central
/// differences over `points`, measured per column `l` as
/// `|J − J_fd|_max / max(1, |J|_max)`. Returns `None` if the field has no
/// analytic Jacobian.
pub fn jacobian_self_check(field: &dyn VectorField, points: &[Vec<f64>]) -> Option<f64> {
    let m = field.state_dim();
    let mut worst: f64 = 0.0;
    let mut jac = vec![0.0; m * m];
    for y in points {
        for l in 0..field.driver_dim() {
            field.jacobian(y, l, &mut jac)?;
            let fd = jacobian_fd(field, y, l);
            let scale = jac.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            let diff = jac.iter().zip(&fd).fold(0.0_f64, |a, (x, z)| a.max((x - z).abs()));
            worst = worst.max(diff / scale);
        }
    }
    Some(worst)
}

/// `Σ_q ∂_q V_l V_{l'}^q − Σ_q ∂_q V_{l'} V_l^q` at `y`.
pub fn bracket(field: &dyn VectorField, y: &[f64], l: usize, l2: usize) -> Result<Vec<f64>> {
    let vl = column(field, y, l);
    let vl2 = column(field, y, l2);
    let a = directional_derivative(field, y, l, &vl2)?;
    let b = directional_derivative(field, y, l2, &vl)?;
    Ok(a.iter().zip(&b).map(|(x, z)| x - z).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutativityClass {
    Noncommutative,
    /// Brackets vanish among the fBm columns.
    DiffusionCommutative,
    /// Brackets vanish among all columns, time included.
    FullyCommutative,
}

impl fmt::Display for CommutativityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommutativityClass::Noncommutative => "noncommutative",
            CommutativityClass::DiffusionCommutative => "diffusion-commutative",
            CommutativityClass::FullyCommutative => "fully-commutative",
        })
    }
}

/// Result of a numerical commutativity probe. Not a proof: the brackets are
/// only evaluated at `probes` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutativityReport {
    pub class: CommutativityClass,
    pub probes: usize,
    pub max_diffusion_bracket: f64,
    pub max_full_bracket: f64,
}

impl fmt::Display for CommutativityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (probed at {} points; max diffusion bracket {:.3e}, max full bracket {:.3e})",
            self.class, self.probes, self.max_diffusion_bracket, self.max_full_bracket
        )
    }
}

pub fn classify_commutativity(
    field: &dyn VectorField,
    probe_points: &[Vec<f64>],
    tol: f64,
) -> Result<CommutativityReport> {
    if probe_points.is_empty() {
        return Err(Error::domain("commutativity probe needs at least one point"));
    }
    let d = field.driver_dim();
    let (mut diffusion, mut full) = (0.0_f64, 0.0_f64);
    for y in probe_points {
        for l in 0..d {
            for l2 in l + 1..d {
                let size = bracket(field, y, l, l2)?.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                full = full.max(size);
                if l >= 1 {
                    diffusion = diffusion.max(size);
                }
            }
        }
    }
    let class = if full <= tol {
        CommutativityClass::FullyCommutative
    } else if diffusion <= tol {
        CommutativityClass::DiffusionCommutative
    } else {
        CommutativityClass::Noncommutative
    };
    Ok(CommutativityReport {
        class,
        probes: probe_points.len(),
        max_diffusion_bracket: diffusion,
        max_full_bracket: full,
    })
}

/// `count` uniform points in `[-radius, radius]^m`.
pub fn random_probe_points(m: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = coordinate_rng(seed, 0);
    (0..count).map(|_| (0..m).map(|_| rng.random_range(-radius..=radius)).collect()).collect()
}

/// Field of the `paper5` benchmark: `V = (3 sin y, 3 cos y, 3 sin y)`, scalar state.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigField;

impl VectorField for TrigField {
    fn state_dim(&self) -> usize {
        1
    }

    fn driver_dim(&self) -> usize {
        3
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let (s, c) = y[0].sin_cos();
        out[0] = 3.0 * s;
        out[1] = 3.0 * c;
        out[2] = 3.0 * s;
    }

    fn jacobian(&self, y: &[f64], l: usize, out: &mut [f64]) -> Option<()> {
        let (s, c) = y[0].sin_cos();
        out[0] = match l {
            0 | 2 => 3.0 * c,
            _ => -3.0 * s,
        };
        Some(())
    }

    fn second_derivative(&self, y: &[f64], l: usize, u: &[f64], v: &[f64], out: &mut [f64]) -> Option<()> {
        let (s, c) = y[0].sin_cos();
        let d2 = match l {
            0 | 2 => -3.0 * s,
            _ => -3.0 * c,
        };
        out[0] = d2 * u[0] * v[0];
        Some(())
    }
}

/// `V_l(y) = A_l y` with one `m × m` matrix per driver column.
#[derive(Debug, Clone)]
pub struct LinearField {
    matrices: Vec<DMatrix<f64>>,
}

impl LinearField {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = matrices
            .first()
            .map(|a| a.nrows())
            .ok_or_else(|| Error::domain("linear field needs at least one column"))?;
        if matrices.iter().any(|a| a.nrows() != m || a.ncols() != m) {
            return Err(Error::domain("linear field matrices must all be m × m"));
        }
        Ok(Self { matrices })
    }

    /// Scalar field `V_l(y) = a_l y`.
    pub fn scalar(coefficients: &[f64]) -> Result<Self> {
        Self::new(coefficients.iter().map(|&a| DMatrix::from_element(1, 1, a)).collect())
    }
}

impl VectorField for LinearField {
    fn state_dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    fn driver_dim(&self) -> usize {
        self.matrices.len()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let m = self.state_dim();
        for (l, a) in self.matrices.iter().enumerate() {
            for q in 0..m {
                out[l * m + q] = (0..m).map(|r| a[(q, r)] * y[r]).sum();
            }
        }
    }

    fn jacobian(&self, _y: &[f64], l: usize, out: &mut [f64]) -> Option<()> {
        let m = self.state_dim();
        let a = &self.matrices[l];
        for q in 0..m {
            for r in 0..m {
                out[q * m + r] = a[(q, r)];
            }
        }
        Some(())
    }

    fn second_derivative(&self, _y: &[f64], _l: usize, _u: &[f64], _v: &[f64], out: &mut [f64]) -> Option<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        Some(())
    }
}

type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type JacobianFn = dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync;

/// A field given by closures, for user-defined problems.
#[derive(Clone)]
pub struct FnField {
    m: usize,
    d: usize,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacobianFn>>,
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("m", &self.m)
            .field("d", &self.d)
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl FnField {
    pub fn new(m: usize, d: usize, eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { m, d, eval: Arc::new(eval), jacobian: None }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&[f64], usize, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }
}

impl VectorField for FnField {
    fn state_dim(&self) -> usize {
        self.m
    }

    fn driver_dim(&self) -> usize {
        self.d
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        (self.eval)(y, out)
    }

    fn jacobian(&self, y: &[f64], l: usize, out: &mut [f64]) -> Option<()> {
        self.jacobian.as_ref().map(|j| j(y, l, out))
    }
}

/// `dY = V(Y) dX`, `Y_0 = y0` on `[0, T]`.
#[derive(Clone)]
pub struct SdeProblem {
    name: String,
    field: Arc<dyn VectorField>,
    y0: Vec<f64>,
    horizon: f64,
    /// For scalar linear problems `dY = Σ a_l Y dX^l`: the coefficients `a_l`,
    /// giving the pathwise solution `y0·exp(Σ a_l X^l_t)`.
    linear_scalar: Option<Vec<f64>>,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("m", &self.field.state_dim())
            .field("d", &self.field.driver_dim())
            .field("y0", &self.y0)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl SdeProblem {
    pub fn new(name: impl Into<String>, field: Arc<dyn VectorField>, y0: Vec<f64>, horizon: f64) -> Result<Self> {
        if y0.len() != field.state_dim() {
            return Err(Error::domain(format!(
                "initial state has length {}, field expects {}",
                y0.len(),
                field.state_dim()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { name: name.into(), field, y0, horizon, linear_scalar: None })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.field.state_dim()
    }

    pub fn driver_dim(&self) -> usize {
        self.field.driver_dim()
    }

    /// Closed-form solution at node `k` of `path`, when one is known.
    pub fn exact_solution(&self, path: &DrivingPath, k: usize) -> Option<Vec<f64>> {
        let coeffs = self.linear_scalar.as_ref()?;
        let exponent: f64 = coeffs.iter().enumerate().map(|(l, a)| a * path.value(k, l)).sum();
        Some(vec![self.y0[0] * exponent.exp()])
    }
}

pub const BUILTIN_PROBLEMS: [&str; 4] = ["paper5", "linear1d", "bm-linear", "noncommutative2d"];

fn parse_params(spec: &str) -> Result<(&str, Vec<(&str, f64)>)> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n, Some(r)),
        None => (spec, None),
    };
    let mut params = Vec::new();
    for item in rest.into_iter().flat_map(|r| r.split(',')).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("problem parameter '{item}' is not key=value")))?;
        let v: f64 =
            v.trim().parse().map_err(|_| Error::domain(format!("problem parameter '{item}' is not numeric")))?;
        params.push((k.trim(), v));
    }
    Ok((name, params))
}

fn take(params: &mut Vec<(&str, f64)>, key: &str, default: f64) -> f64 {
    match params.iter().position(|(k, _)| *k == key) {
        Some(i) => params.remove(i).1,
        None => default,
    }
}

/// Looks up a builtin problem. Parameters may follow the name as
/// `name:key=value,...`, e.g. `linear1d:a=0.25,y0=2`.
///
/// * `paper5`: `dY = 3 sin Y dt + 3 cos Y dX² + 3 sin Y dX³`, `Y_0 = 5`, `T = 1`.
/// * `linear1d`: `dY = a Y dX²` (`a = 0.5`, `y0 = 1`), solution `y0·exp(a X²_t)`.
/// * `bm-linear`: `dY = λ Y dt` (`lambda = 1`, `y0 = 5`), time-only driver.
/// * `noncommutative2d`: `V_2(y) = (y_2 + y_1/2, y_2/2)`, `V_3(y) = (0, y_1)`,
///   zero drift, `y0 = (1, 1)`. Its fBm columns do not commute and `∂V_2 V_2 ≠ 0`.
pub fn builtin_problem(spec: &str) -> Result<SdeProblem> {
    let (name, mut params) = parse_params(spec)?;
    let problem = match name {
        "paper5" => {
            let y0 = take(&mut params, "y0", 5.0);
            SdeProblem::new("paper5", Arc::new(TrigField), vec![y0], 1.0)?
        }
        "linear1d" => {
            let a = take(&mut params, "a", 0.5);
            let y0 = take(&mut params, "y0", 1.0);
            let coeffs = vec![0.0, a];
            let mut p = SdeProblem::new(spec, Arc::new(LinearField::scalar(&coeffs)?), vec![y0], 1.0)?;
            p.linear_scalar = Some(coeffs);
            p
        }
        "bm-linear" => {
            let lambda = take(&mut params, "lambda", 1.0);
            let y0 = take(&mut params, "y0", 5.0);
            let coeffs = vec![lambda];
            let mut p = SdeProblem::new(spec, Arc::new(LinearField::scalar(&coeffs)?), vec![y0], 1.0)?;
            p.linear_scalar = Some(coeffs);
            p
        }
        "noncommutative2d" => {
            let zero = DMatrix::zeros(2, 2);
            let a2 = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
            let a3 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
            SdeProblem::new("noncommutative2d", Arc::new(LinearField::new(vec![zero, a2, a3])?), vec![1.0, 1.0], 1.0)?
        }
        other => {
            return Err(Error::domain(format!("unknown problem '{other}'; available: {}", BUILTIN_PROBLEMS.join(", "))))
        }
    };
    if let Some((k, _)) = params.first() {
        return Err(Error::domain(format!("problem '{name}' has no parameter '{k}'")));
    }
    Ok(problem)
}
