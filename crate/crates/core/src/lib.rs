//! Evolutionary inclusions with operator-valued memory kernels.
//!
//! The crate discretizes problems of the form
//! `(U, F) ∈ ∂_0 M(∂_0^{-1}) + A` on an exponentially weighted time axis, where the
//! material law `M` is assembled from memory kernels and `A` is a skew block operator
//! plus a maximal monotone relation. It provides
//!
//! * weighted signals, the Fourier-Laplace transform and `∂_0^{±1}` ([`weighted_space`]),
//! * matrix-valued kernels, their transforms, convolution and the hypothesis checks
//!   ([`kernels`]),
//! * material laws and their solvability margins ([`material_laws`]),
//! * resolvent-based monotone relations ([`monotone`]),
//! * 1D staggered-grid operators ([`operators`]),
//! * frequency- and time-domain solvers with causality and Lipschitz harnesses
//!   ([`solver`]),
//! * the visco-elastic and phase-transition scenarios ([`scenarios`]),
//! * TOML input files for kernels, material laws, problems and scenarios ([`config`]).

pub mod config;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod material_laws;
pub mod monotone;
pub mod operators;
pub mod quadrature;
pub mod scenarios;
pub mod solver;
pub mod tolerances;
pub mod weighted_space;

pub use error::{Error, Result};
pub use kernels::OperatorKernel;
pub use material_laws::MaterialLaw;
pub use monotone::MonotoneRelation;
pub use operators::BlockOperator;
pub use weighted_space::{Spectrum, TimeGrid, WeightedSignal};
