//! Numerical integration of SDEs driven by multi-dimensional fractional
//! Brownian motion with Hurst parameter `H > 1/2`.
//!
//! The equation is `dY = V(Y) dX` where `X = (t, B², …, Bᵈ)`: the first driver
//! coordinate is time and the remaining ones are independent fBms sharing one
//! Hurst parameter. Paths are integrated in the Young (pathwise) sense.
//!
//! * [`fbm`] samples the driver exactly on uniform grids (Cholesky and
//!   circulant embedding) and restricts fine paths to coarse grids.
//! * [`problem`] defines vector fields, derivative oracles, commutativity
//!   probes and the builtin benchmark problems.
//! * [`schemes`] holds Butcher tableaus, the Runge–Kutta stepper (explicit and
//!   implicit), the simplified step-N Euler schemes and trajectory integration.
//! * [`analysis`] estimates strong errors, fits log-log convergence slopes,
//!   computes discrete Hölder seminorms and Lévy-area discrepancy rates.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fbm;
pub mod io;
pub mod problem;
pub mod rng;
pub mod schemes;

pub use error::{Error, Result};
pub use fbm::{DrivingPath, HurstParameter, SamplerKind, UniformGrid};
pub use problem::{builtin_problem, CommutativityClass, SdeProblem, VectorField};
pub use schemes::{ButcherTableau, Scheme, SolverConfig, Trajectory};
