//! Numerical substrate: log-domain magnitudes, step-count solvers, dense
//! stochastic matrices, total variation, and reversible eigensolvers.

mod exact;
mod log_magnitude;
mod markov;
mod steps;

pub use exact::{azuma_tail_holds, binomial_tail_le};
pub use log_magnitude::LogMagnitude;
pub use markov::{
    exact_min_steps, matrix_power_tv, reversible_decomposition, reversible_spectrum,
    stationary_distribution, tv_curve, tv_distance, worst_start_tv_curve, Distribution,
    ReversibleSpectrum, StochasticMatrix, MAX_EXACT_STEPS,
};
pub use steps::{eval_geometric, min_steps_geometric, GeometricTerm, StepCount};
