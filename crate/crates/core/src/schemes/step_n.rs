//! Simplified step-N Euler schemes. With `f = V(·)ΔX` and `𝒱_f = Σ_q f^q ∂_q`,
//!
//! ```text
//! y_next = y + Σ_{w=1..N} (1/w!) (𝒱_f)^{w-1} f (y)
//! ```
//!
//! For `N = 2` this is `y + VΔX + ½ Σ_{l,l'} ∂V_l V_{l'} ΔX^{l'} ΔX^l`, the
//! modified Milstein scheme. `N = 3` adds `(1/6)(D²f[f, f] + Df·Df·f)` and
//! needs an analytic second-derivative oracle.

use super::rk::contract;
use crate::error::{Error, Result};
use crate::problem::{directional_derivative, VectorField};

pub const MAX_STEP_N_ORDER: usize = 3;

/// `Df(y)·v = Σ_l ΔX^l ∂V_l(y)·v`.
fn increment_derivative(field: &dyn VectorField, y: &[f64], dx: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; y.len()];
    for (l, &dxl) in dx.iter().enumerate() {
        if dxl == 0.0 {
            continue;
        }
        for (o, dv) in out.iter_mut().zip(directional_derivative(field, y, l, v)?) {
            *o += dxl * dv;
        }
    }
    Ok(out)
}

/// Checks that `field` supports the derivatives a step-N scheme of this order
/// needs, probing the oracle at `y`.
pub fn check_step_n_capability(field: &dyn VectorField, order: usize, y: &[f64]) -> Result<()> {
    match order {
        0 | 1 => Err(Error::domain(format!("step-N Euler needs N ≥ 2, got {order}"))),
        2 => Ok(()),
        3 => {
            let m = field.state_dim();
            let mut out = vec![0.0; m];
            let u = vec![0.0; m];
            field
                .second_derivative(y, 0, &u, &u, &mut out)
                .ok_or_else(|| Error::Capability("step-3 Euler needs an analytic second-derivative oracle".into()))
        }
        n => Err(Error::Unsupported(format!("step-{n} Euler (only N ≤ {MAX_STEP_N_ORDER} is implemented)"))),
    }
}

pub fn step_n_euler_step(field: &dyn VectorField, y: &[f64], dx: &[f64], order: usize) -> Result<Vec<f64>> {
    check_step_n_capability(field, order, y)?;
    let (m, d) = (field.state_dim(), field.driver_dim());
    if y.len() != m || dx.len() != d {
        return Err(Error::domain(format!("state must have length {m} and increment length {d}")));
    }
    let mut scratch = vec![0.0; m * d];
    let mut f = vec![0.0; m];
    contract(field, y, dx, &mut scratch, &mut f);

    let df_f = increment_derivative(field, y, dx, &f)?;
    let mut next: Vec<f64> = y.iter().zip(&f).zip(&df_f).map(|((yi, fi), gi)| yi + fi + 0.5 * gi).collect();

    if order == 3 {
        let df_df_f = increment_derivative(field, y, dx, &df_f)?;
        let mut d2 = vec![0.0; m];
        let mut buf = vec![0.0; m];
        for (l, &dxl) in dx.iter().enumerate() {
            if dxl == 0.0 {
                continue;
            }
            field
                .second_derivative(y, l, &f, &f, &mut buf)
                .ok_or_else(|| Error::Capability("missing second-derivative oracle".into()))?;
            for (o, b) in d2.iter_mut().zip(&buf) {
                *o += dxl * b;
            }
        }
        for ((n, a), b) in next.iter_mut().zip(&d2).zip(&df_df_f) {
            *n += (a + b) / 6.0;
        }
    }
    Ok(next)
}
