use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::{interpolate_linear, Trajectory};

/// Which pathwise error feeds the mean-square aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// Maximum over the coarse nodes.
    #[default]
    Nodes,
    /// Maximum over the fine nodes of the linearly interpolated coarse solution.
    Interp,
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMode::Nodes => "nodes",
            ErrorMode::Interp => "interp",
        })
    }
}

impl FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" => Ok(ErrorMode::Nodes),
            "interp" | "interpolated" => Ok(ErrorMode::Interp),
            other => Err(Error::domain(format!("unknown error mode '{other}' (expected nodes or interp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    /// Step count of the coarse trajectory.
    pub steps: usize,
    pub max_node_error: f64,
    pub sup_interp_error: f64,
}

impl ErrorSample {
    pub fn value(&self, mode: ErrorMode) -> f64 {
        match mode {
            ErrorMode::Nodes => self.max_node_error,
            ErrorMode::Interp => self.sup_interp_error,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pathwise error of `coarse` against a fine `reference` computed on the same
/// driver realization.
pub fn strong_error(reference: &Trajectory, coarse: &Trajectory) -> Result<ErrorSample> {
    if reference.seed_record() != coarse.seed_record() {
        return Err(Error::Protocol(format!(
            "trajectories come from different driver realizations ({:?} vs {:?})",
            reference.seed_record(),
            coarse.seed_record()
        )));
    }
    if reference.state_dim() != coarse.state_dim() {
        return Err(Error::Protocol("trajectories have different state dimensions".into()));
    }
    let factor = reference
        .grid()
        .coarsening_factor(coarse.grid())
        .ok_or_else(|| Error::Protocol("coarse grid does not divide the reference grid".into()))?;

    let max_node_error =
        (0..=coarse.grid().steps()).map(|k| distance(coarse.state(k), reference.state(k * factor))).fold(0.0, f64::max);
    let mut sup_interp_error = 0.0_f64;
    for j in 0..=reference.grid().steps() {
        let value = if j % factor == 0 {
            coarse.state(j / factor).to_vec()
        } else {
            interpolate_linear(coarse, reference.grid().node(j))?
        };
        sup_interp_error = sup_interp_error.max(distance(&value, reference.state(j)));
    }
    Ok(ErrorSample { steps: coarse.grid().steps(), max_node_error, sup_interp_error })
}
