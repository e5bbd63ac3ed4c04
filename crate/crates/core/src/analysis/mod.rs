//! Error metrics, convergence studies and pathwise statistics.

mod convergence;
mod fit;
mod holder;
mod levy;
mod strong;

pub use convergence::{convergence_study, ConvergenceReport, LevelError, StudyConfig, MAX_RESAMPLE_FRACTION};
pub use fit::{fit_loglog_slope, SlopeFit};
pub use holder::{holder_seminorm_discrete, HOLDER_MAX_NODES};
pub use levy::{levy_discrepancy_rate, LevyConfig, LevyDiscrepancySample, LevyFit, LevyReport, MIN_REFINEMENT};
pub use strong::{strong_error, ErrorMode, ErrorSample};

/// Neumaier-compensated sum. Fed in a fixed order, it makes Monte Carlo
/// aggregates independent of how the per-path work was scheduled.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Maps `f` over `0..count`, in parallel when the `parallel` feature is on.
/// Results come back in index order.
pub(crate) fn map_indexed<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}
