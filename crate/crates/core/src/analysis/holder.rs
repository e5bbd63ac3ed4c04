use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::fbm::UniformGrid;

/// Largest node range accepted; the seminorm visits all pairs.
pub const HOLDER_MAX_NODES: usize = 4097;

/// Discrete Hölder seminorm `max_{u<v} |f_v − f_u| / (t_v − t_u)^β` over the
/// nodes in `range`. `values` holds `dim` components per node.
pub fn holder_seminorm_discrete(
    values: &[f64],
    dim: usize,
    grid: &UniformGrid,
    beta: f64,
    range: RangeInclusive<usize>,
) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain(format!("Hölder exponent must lie in (0, 1], got {beta}")));
    }
    if dim == 0 || values.len() != (grid.steps() + 1) * dim {
        return Err(Error::domain("values do not match the grid"));
    }
    let (start, end) = (*range.start(), *range.end());
    if end > grid.steps() || end <= start {
        return Err(Error::domain(format!("node range {start}..={end} needs two nodes within the grid")));
    }
    if end - start + 1 > HOLDER_MAX_NODES {
        return Err(Error::Capacity(format!("Hölder seminorm limited to {HOLDER_MAX_NODES} nodes")));
    }
    let at = |k: usize| &values[k * dim..(k + 1) * dim];
    let mut best = 0.0_f64;
    for u in start..end {
        for v in u + 1..=end {
            let diff = at(u).iter().zip(at(v)).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
            best = best.max(diff / (grid.node(v) - grid.node(u)).powf(beta));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let g = UniformGrid::new(1.0, 10).unwrap();
        let ident: Vec<f64> = g.nodes().collect();
        let v = holder_seminorm_discrete(&ident, 1, &g, 1.0, 0..=10).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(holder_seminorm_discrete(&[3.0; 11], 1, &g, 0.5, 0..=10).unwrap(), 0.0);

        let g4 = UniformGrid::new(1.0, 4).unwrap();
        let sqrt: Vec<f64> = g4.nodes().map(f64::sqrt).collect();
        // Enumerating the 10 pairs: the largest quotient is the first cell's.
        let v = holder_seminorm_discrete(&sqrt, 1, &g4, 0.5, 0..=4).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = holder_seminorm_discrete(&sqrt, 1, &g4, 0.5, 1..=4).unwrap();
        assert!(v < 1.0);
    }

    #[test]
    fn errors() {
        let g = UniformGrid::new(1.0, 4).unwrap();
        let f = [0.0; 5];
        assert!(holder_seminorm_discrete(&f, 1, &g, 0.0, 0..=4).is_err());
        assert!(holder_seminorm_discrete(&f, 1, &g, 1.5, 0..=4).is_err());
        assert!(holder_seminorm_discrete(&f, 1, &g, 0.5, 2..=2).is_err());
        assert!(holder_seminorm_discrete(&f, 1, &g, 0.5, 0..=5).is_err());
    }
}
