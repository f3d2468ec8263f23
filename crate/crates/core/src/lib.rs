//! Steady-state bifurcation analysis and time integration for the nonlocal
//! Kuramoto–Sivashinsky equation
//!
//! ```text
//! u_t + u u_x = Λ^r u − ε Λ^s u,    x ∈ [-π, π),  u odd,
//! ```
//!
//! where `Λ^α` multiplies the `k`-th Fourier mode by `|k|^α`. The unknown is
//! a sine series ([`SpectralField`]); all routines are generic over the
//! floating point type through [`Real`], with `f64` aliases below.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read closer to the textbook triangular solves.
#![allow(clippy::needless_range_loop)]

pub mod bifurcation;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod io;
pub mod linalg;
pub mod scalar;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use scalar::Real;
pub use spectral::{ModelParams, SpectralField};

pub type Field = spectral::SpectralField<f64>;
pub type Params = spectral::ModelParams<f64>;
pub type BifurcationPoint = bifurcation::BifurcationPoint<f64>;
pub type Branch = continuation::Branch<f64>;
pub type BranchPoint = continuation::BranchPoint<f64>;
pub type ContinuationConfig = continuation::ContinuationConfig<f64>;
pub type NewtonConfig = steady::NewtonConfig<f64>;
pub type Trajectory = evolution::Trajectory<f64>;
