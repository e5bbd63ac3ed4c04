use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the order conditions.
pub const ORDER_CONDITION_TOL: f64 = 1e-12;

/// Coefficients `(a_ij, b_i)` of an s-stage Runge–Kutta method.
///
/// Serialized as `{"s": int, "a": [[...]], "b": [...], "name": string}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTableau", into = "RawTableau")]
pub struct ButcherTableau {
    name: String,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    explicit: bool,
}

#[derive(Serialize, Deserialize)]
struct RawTableau {
    s: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default)]
    name: String,
}

impl TryFrom<RawTableau> for ButcherTableau {
    type Error = Error;

    fn try_from(raw: RawTableau) -> Result<Self> {
        let t = ButcherTableau::new(raw.name, raw.a, raw.b)?;
        if t.stages() != raw.s {
            return Err(Error::domain(format!("tableau declares s={} but has {} stages", raw.s, t.stages())));
        }
        Ok(t)
    }
}

impl From<ButcherTableau> for RawTableau {
    fn from(t: ButcherTableau) -> Self {
        RawTableau { s: t.stages(), a: t.a, b: t.b, name: t.name }
    }
}

impl ButcherTableau {
    pub fn new(name: impl Into<String>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::domain("tableau needs at least one stage"));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::domain(format!("a must be {s}×{s} to match b")));
        }
        if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::domain("tableau coefficients must be finite"));
        }
        let c = a.iter().map(|row| row.iter().sum()).collect();
        let explicit = a.iter().enumerate().all(|(i, row)| row[i..].iter().all(|&v| v == 0.0));
        Ok(Self { name: name.into(), a, b, c, explicit })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Row sums `c_i = Σ_j a_ij`.
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// True iff `a` is strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    pub fn euler() -> Self {
        Self::new("euler", vec![vec![0.0]], vec![1.0]).unwrap()
    }

    /// Two-stage Heun method: `Z_1 = y`, `Z_2 = y + V(Z_1)ΔX`, weights `(1/2, 1/2)`.
    pub fn heun() -> Self {
        Self::new("heun", vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap()
    }

    /// Implicit midpoint rule.
    pub fn midpoint() -> Self {
        Self::new("midpoint", vec![vec![0.5]], vec![1.0]).unwrap()
    }

    /// Classical four-stage method.
    pub fn rk4() -> Self {
        Self::new(
            "rk4",
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0],
        )
        .unwrap()
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "euler" => Some(Self::euler()),
            "heun" => Some(Self::heun()),
            "midpoint" => Some(Self::midpoint()),
            "rk4" => Some(Self::rk4()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tableau serialization cannot fail")
    }

    /// Deterministic (ODE) order of the method, checked up to order 4.
    pub fn classical_order(&self) -> usize {
        let s = self.stages();
        let (a, b, c) = (&self.a, &self.b, &self.c);
        let dot = |u: &[f64]| -> f64 { b.iter().zip(u).map(|(x, y)| x * y).sum() };
        let a_times = |u: &[f64]| -> Vec<f64> { (0..s).map(|i| (0..s).map(|j| a[i][j] * u[j]).sum()).collect() };
        let close = |x: f64, y: f64| (x - y).abs() <= ORDER_CONDITION_TOL;
        let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
        let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
        let ac = a_times(c);
        let ac2 = a_times(&c2);
        let aac = a_times(&ac);
        let cac: Vec<f64> = c.iter().zip(&ac).map(|(x, y)| x * y).collect();

        let conditions: [&[(f64, f64)]; 4] = [
            &[(b.iter().sum(), 1.0)],
            &[(dot(c), 0.5)],
            &[(dot(&c2), 1.0 / 3.0), (dot(&ac), 1.0 / 6.0)],
            &[(dot(&c3), 0.25), (dot(&cac), 0.125), (dot(&ac2), 1.0 / 12.0), (dot(&aac), 1.0 / 24.0)],
        ];
        conditions.iter().take_while(|group| group.iter().all(|&(v, want)| close(v, want))).count()
    }
}

/// Check of `Σ b_i = 1` and `Σ b_i c_i = 1/2`, the conditions for strong rate
/// `2H − 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderConditionReport {
    pub sum_b: f64,
    pub sum_bc: f64,
    pub satisfies_order_conditions: bool,
    /// `Σ_i b_i (Σ_j b_j − 2 a_ij)`; equals `1 − 2 Σ b_i c_i` when `Σ b_i = 1`.
    pub equivalent_form_residual: f64,
}

pub fn check_order_conditions(tab: &ButcherTableau) -> OrderConditionReport {
    let sum_b: f64 = tab.b.iter().sum();
    let sum_bc: f64 = tab.b.iter().zip(&tab.c).map(|(b, c)| b * c).sum();
    // Σ_j (b_j − 2 a_ij) = Σb − 2 c_i
    let equivalent_form_residual = tab.b.iter().zip(&tab.c).map(|(bi, ci)| bi * (sum_b - 2.0 * ci)).sum();
    OrderConditionReport {
        sum_b,
        sum_bc,
        satisfies_order_conditions: (sum_b - 1.0).abs() <= ORDER_CONDITION_TOL
            && (sum_bc - 0.5).abs() <= ORDER_CONDITION_TOL,
        equivalent_form_residual,
    }
}
