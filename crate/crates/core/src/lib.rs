//! Robust estimation of the mean of a nonnegative random variable whose
//! relative standard deviation is bounded by a known constant `c`.
//!
//! The estimator is the zero of
//!
//! ```text
//! Psi(m) = (1/n) * sum_i  lambda^-1 * d(lambda * (X_i / m - 1))
//! ```
//!
//! where `d` is a bounded weighted difference that behaves like the identity
//! near zero and like the sign function far from it. Small `lambda` recovers
//! the sample mean, large `lambda` the sample median. Choosing `lambda` from
//! `(epsilon, delta, c)` with [`planner::plan`] yields an estimate whose
//! relative error exceeds `epsilon` with probability at most `delta`.
//!
//! Module map:
//!
//! * [`weights`]: the weighted-difference functions and the scaled per-sample term.
//! * [`psi`]: validated sample sets and the aggregate objective.
//! * [`solver`]: bisection and exact (cubic) root location.
//! * [`planner`]: sample-size and scale-factor planning rules.
//! * [`distributions`]: seeded generators for the experiment workloads.
//! * [`experiments`]: interpolation, coverage and timing experiments.
//! * [`cli`]: the `relmean` command-line front end.

pub mod cli;
pub mod cubic;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod planner;
pub mod psi;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use planner::{plan, EstimatorPlan, PlanRule};
pub use psi::SampleSet;
pub use solver::{solve_bisection, solve_exact, RootResult, SolverMethod};
pub use weights::WeightKind;
