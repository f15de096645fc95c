//! Solvers for `(∂_0 M(∂_0^{-1}) + A) U = F` and its monotone extension.
//!
//! [`FrequencySolver`] solves the linear problem frequency by frequency on the DFT grid.
//! [`TimeStepper`] marches the inclusion forward with backward differences, strictly
//! causal convolution sums and a resolvent step for the monotone part. Both refuse to
//! run when the sampled solvability margin at `nu` is not positive, unless forced.

mod discrete;
mod frequency;
mod harness;
mod residuals;
mod rhs;
mod time;

use crate::error::{Error, Result};
use crate::material_laws::{solvability_margin, MarginGrid, MaterialLaw, SolvabilityReport};
use crate::monotone::MonotoneRelation;
use crate::operators::BlockOperator;
use crate::weighted_space::WeightedSignal;

pub use frequency::{solve_linear_frequency, FrequencySolution, FrequencySolver};
pub use harness::{
    causality_check, lipschitz_check, random_rhs, CausalityReport, LipschitzReport, SolveOperator,
};
pub use residuals::{
    central_derivative, hyperbolic_residual, parabolic_residual, second_difference, trapezoid_antiderivative,
    trapezoid_convolve,
};
pub use rhs::{build_history_rhs, build_ivp_rhs, history_residual, DeltaSource};
pub use time::{solve_inclusion_time, TimeSolution, TimeStepper};

/// `(∂_0 M(∂_0^{-1}) + A) U = F`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub law: MaterialLaw,
    pub a: BlockOperator,
    pub f: WeightedSignal,
}

/// `(U, F) ∈ ∂_0 M(∂_0^{-1}) + A + A_mono`, where `A_mono` acts on the named fields.
#[derive(Debug, Clone)]
pub struct InclusionProblem {
    pub law: MaterialLaw,
    pub a: BlockOperator,
    pub relations: Vec<(String, MonotoneRelation)>,
    pub f: WeightedSignal,
}

impl LinearProblem {
    pub fn new(law: MaterialLaw, a: BlockOperator, f: WeightedSignal) -> Result<Self> {
        check_dims(&law, &a, f.dim())?;
        Ok(Self { law, a, f })
    }

    pub fn nu(&self) -> f64 {
        self.f.nu()
    }
}

impl InclusionProblem {
    pub fn new(
        law: MaterialLaw,
        a: BlockOperator,
        relations: Vec<(String, MonotoneRelation)>,
        f: WeightedSignal,
    ) -> Result<Self> {
        check_dims(&law, &a, f.dim())?;
        for (field, rel) in &relations {
            let idx = law.field_index(field)?;
            if law.field_range(idx).len() != rel.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "relation `{}` has dimension {} but field `{field}` has {}",
                    rel.name(),
                    rel.dim(),
                    law.field_range(idx).len()
                )));
            }
            if !rel.contains_origin() {
                return Err(Error::Precondition(format!("relation `{}` does not contain (0, 0)", rel.name())));
            }
        }
        Ok(Self { law, a, relations, f })
    }

    pub fn nu(&self) -> f64 {
        self.f.nu()
    }

    /// The linear part alone.
    pub fn linear_part(&self) -> LinearProblem {
        LinearProblem { law: self.law.clone(), a: self.a.clone(), f: self.f.clone() }
    }
}

fn check_dims(law: &MaterialLaw, a: &BlockOperator, f_dim: usize) -> Result<()> {
    if law.dim() != a.dim() || law.dim() != f_dim {
        return Err(Error::DimensionMismatch(format!(
            "material law has dimension {}, operator {}, right-hand side {}",
            law.dim(),
            a.dim(),
            f_dim
        )));
    }
    Ok(())
}

/// Sampled margin on the half plane `Re z^{-1} >= nu`; an error unless positive or forced.
pub fn margin_gate(law: &MaterialLaw, nu: f64, force: bool) -> Result<SolvabilityReport> {
    if !(nu > 0.0) {
        return Err(Error::Precondition(format!("nu must be positive, got {nu}")));
    }
    let r1 = 1.0 / (2.0 * nu);
    let report = solvability_margin(law, r1, &MarginGrid::standard(r1))?;
    if !(report.c_est > 0.0) && !force {
        return Err(Error::MarginGate { c_est: report.c_est });
    }
    Ok(report)
}
