//! Convergence-rate laboratory for two-component Gibbs samplers.
//!
//! The crate computes exact total-variation distances for small conjugate
//! chains, evaluates several families of upper and lower bounds on the number
//! of steps needed to mix, and compares systematic and random scan orders.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod families;
pub mod numerics;
pub mod operators;
pub mod report;
pub mod scan_compare;
pub mod spectral;

pub use error::{Error, Result};
