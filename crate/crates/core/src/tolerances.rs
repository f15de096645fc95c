//! Tolerances used across the crate, in one place.
//!
//! | Category | Value | Used for |
//! |----------|-------|----------|
//! | algebraic | 1e-10 | exact identities, causality leakage, step residuals |
//! | structural | 1e-12 | selfadjointness, commutation, skew structure (relative) |
//! | quadrature | 1e-6 | quadrature-relative comparisons |
//! | scheme | O(dt) | time-stepping errors, checked by dt ladders |
//!
//! [`Tolerances`] carries the run-time adjustable subset; config files set it in a
//! `[tolerances]` section.

use serde::{Deserialize, Serialize};

/// Identities that hold up to round-off in compositions of exact operations.
pub const ALGEBRAIC: f64 = 1e-10;

/// Relative tolerance for structure tests on matrices (selfadjoint, commuting, skew).
pub const STRUCTURAL: f64 = 1e-12;

/// Relative tolerance for quadrature-based comparisons.
pub const QUADRATURE_REL: f64 = 1e-6;

/// Absolute slack for firm nonexpansiveness checks of resolvents.
pub const MONOTONE: f64 = 1e-10;

/// Target accuracy of the forward-backward inner iteration in the time stepper.
pub const INNER_ITERATION: f64 = 1e-13;

/// Cap on inner forward-backward iterations per time step.
pub const INNER_MAX_ITER: usize = 10_000;

/// Largest |nu t| accepted before `exp` over- or underflows.
pub const MAX_EXPONENT: f64 = 700.0;

/// Tolerances adjustable per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Causality leakage.
    pub algebraic: f64,
    /// Commutation of stiffness and kernel, conjugated `d` bound.
    pub structural: f64,
    /// Sampled margin against its analytic lower bound.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { algebraic: ALGEBRAIC, structural: STRUCTURAL, quadrature: QUADRATURE_REL }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [("algebraic", self.algebraic), ("structural", self.structural), ("quadrature", self.quadrature)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(crate::Error::Config(format!("tolerance `{name}` must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}
