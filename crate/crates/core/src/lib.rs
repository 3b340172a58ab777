//! Simulation and verification toolkit for the forced linear stochastic
//! dyadic model
//!
//! ```text
//! dX_n = k_{n-1} X_{n-1} o dW_{n-1} - k_n X_{n+1} o dW_n,   k_n = lambda^n,
//! ```
//!
//! forced by `sigma dW_0` on the first mode. Three computational views of the
//! model live here and are checked against each other and against closed
//! forms:
//!
//! * [`galerkin`]: pathwise simulation of the truncated SDE system;
//! * [`moments`]: the linear second-moment (forward Kolmogorov) equations;
//! * [`ctmc`]: the explosive birth-death chain whose minimal transition
//!   function represents the second moments.
//!
//! [`crossval`] ties them together into experiments with explicit tolerances.
//! Modes are numbered from 1 in every public interface.

pub mod crossval;
pub mod ctmc;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod noise;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    sobolev_norm, stationary_second_moments, wavenumber, Boundary, ModelParams, SobolevIndex,
    StateVector, TruncationSpec,
};
pub use moments::{
    build_q_matrix, forward_with_integral, h_minus_one_drift, h_minus_one_functional, regularity_bound, solve_forward,
    truncated_stationary, ForwardSolution, MomentVector, QMatrix, RegularityBound,
};
