//! Three-field phase transition `(θ, χ, q)` in integrated form:
//!
//! `∂_0 diag(0, α, (1 - K*)^{-1}) + [[1 + C*, 1 + D*, 0], [-λ, 0, 0], [0, 0, 0]]
//!  + [[0, 0, div], [0, 𝕃, 0], [grad, 0, 0]]` with right-hand side `(∂_0^{-1} f, 0, 0)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    flag, run_causality, run_lipschitz, write_harness, write_hypotheses, write_margin, CausalitySummary,
    HypothesisSummary, LipschitzSummary, MarginSummary, NodalSource, ScenarioChecks, ScenarioRun, TimeShape,
};
use crate::error::{Error, Result};
use crate::kernels::{check_hypotheses, HypothesisOptions, OperatorKernel};
use crate::linalg::RMatrix;
use crate::material_laws::{hyp_b_bound, BlockKind, MaterialLaw};
use crate::monotone::MonotoneRelation;
use crate::operators::{assemble_phase_skew, build_grad_dirichlet_1d, BlockOperator};
use crate::solver::{central_derivative, trapezoid_antiderivative, trapezoid_convolve, TimeStepper};
use crate::tolerances::{Tolerances, MONOTONE};
use crate::weighted_space::{causal_antiderivative, TimeGrid, WeightedSignal};

#[derive(Debug, Clone)]
pub struct PhaseTransitionScenario {
    pub cells: usize,
    pub length: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Memory of the heat content, on the `cells - 1` nodes.
    pub kernel_c: OperatorKernel,
    /// Memory of the latent heat, on the nodes.
    pub kernel_d: OperatorKernel,
    /// Memory of the heat flux, on the cells.
    pub kernel_k: OperatorKernel,
    /// The relation acting on `χ`.
    pub relation: MonotoneRelation,
    /// Heat source `f` before integration.
    pub source: NodalSource,
    pub nu: f64,
    pub dt: f64,
    pub tmax: f64,
    pub checks: ScenarioChecks,
    pub tolerances: Tolerances,
}

impl Default for PhaseTransitionScenario {
    fn default() -> Self {
        let cells = 64;
        let nodes = DMatrix::identity(cells - 1, cells - 1);
        Self {
            cells,
            length: 1.0,
            alpha: 1.0,
            lambda: 0.5,
            kernel_c: OperatorKernel::exponential(1.0, &nodes * 0.2).expect("valid kernel"),
            kernel_d: OperatorKernel::exponential(1.0, &nodes * 0.2).expect("valid kernel"),
            kernel_k: OperatorKernel::exponential(1.0, DMatrix::identity(cells, cells) * 0.5).expect("valid kernel"),
            relation: MonotoneRelation::heaviside_inverse(cells - 1),
            source: NodalSource { amplitude: 20.0, shape: TimeShape::Ramp { rise: 0.2 } },
            nu: 4.0,
            dt: 1.0 / 256.0,
            tmax: 4.0,
            checks: ScenarioChecks::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Lower bound `min(1 - |C| - s/2, nu alpha - k²/(2s))` with `k = 1 + |D| + lambda`,
/// at the `s = ε²` balancing both terms. Returns `(bound, s)`.
pub fn phase_epsilon_bound(c_l1: f64, d_l1: f64, lambda: f64, alpha: f64, nu: f64) -> (f64, f64) {
    let a = 1.0 - c_l1;
    let b = nu * alpha;
    let k = 1.0 + d_l1 + lambda;
    let s = (a - b) + ((a - b) * (a - b) + k * k).sqrt();
    (a - 0.5 * s, s)
}

impl PhaseTransitionScenario {
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn dim(&self) -> usize {
        3 * self.cells - 2
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::spanning(0.0, self.tmax, self.dt)
    }

    fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.lambda > 0.0) {
            return Err(Error::Precondition(format!("need alpha, lambda > 0, got {}, {}", self.alpha, self.lambda)));
        }
        let n = self.cells - 1;
        for (name, k, d) in [("C", &self.kernel_c, n), ("D", &self.kernel_d, n), ("K", &self.kernel_k, self.cells)] {
            if k.dim() != d {
                return Err(Error::DimensionMismatch(format!("kernel {name} has dimension {}, expected {d}", k.dim())));
            }
        }
        if self.relation.dim() != n || !self.relation.contains_origin() {
            return Err(Error::Precondition(format!(
                "relation `{}` must act on {n} components and contain the origin",
                self.relation.name()
            )));
        }
        Ok(())
    }

    pub fn gradient(&self) -> Result<RMatrix> {
        Ok(build_grad_dirichlet_1d(self.cells, self.h())?.0)
    }

    pub fn law(&self) -> Result<MaterialLaw> {
        let n = self.cells - 1;
        let eye = DMatrix::identity(n, n);
        MaterialLaw::new(vec![("theta".into(), n), ("chi".into(), n), ("q".into(), self.cells)])
            .with_entry("theta", "theta", BlockKind::Par2(self.kernel_c.clone()))?
            .with_entry("theta", "chi", BlockKind::Par2(self.kernel_d.clone()))?
            .with_entry("chi", "theta", BlockKind::ZConst(&eye * -self.lambda))?
            .with_entry("chi", "chi", BlockKind::Const(&eye * self.alpha))?
            .with_entry("q", "q", BlockKind::Hyp1(self.kernel_k.clone()))
    }

    pub fn operator(&self) -> Result<BlockOperator> {
        let n = self.cells - 1;
        assemble_phase_skew(&self.gradient()?, vec![("theta".into(), n), ("chi".into(), n), ("q".into(), self.cells)])
    }

    /// The heat source `f` on the `θ` components.
    pub fn source_signal(&self) -> Result<WeightedSignal> {
        self.source.signal(self.grid()?, self.nu, self.cells, self.length, self.dim(), 0)
    }

    /// `(∂_0^{-1} f, 0, 0)`.
    pub fn rhs(&self) -> Result<WeightedSignal> {
        Ok(causal_antiderivative(&self.source_signal()?))
    }

    pub fn relations(&self) -> Vec<(String, MonotoneRelation)> {
        vec![("chi".into(), self.relation.clone())]
    }

    /// Relative residual of `∂_0(1 + C*)θ + ∂_0(1 + D*)χ + G^T(1 - K*)Gθ = f` with
    /// central differences and trapezoid convolutions.
    pub fn first_row_residual(&self, u: &WeightedSignal) -> Result<f64> {
        let n = self.cells - 1;
        let theta = u.slice_components(0..n)?;
        let chi = u.slice_components(n..2 * n)?;
        let g = self.gradient()?;
        let f = self.source_signal()?.slice_components(0..n)?;
        let heat = theta.add(&trapezoid_convolve(&self.kernel_c, &theta)?)?;
        let latent = chi.add(&trapezoid_convolve(&self.kernel_d, &chi)?)?;
        let gt = apply(&g, &theta)?;
        let flux = gt.sub(&trapezoid_convolve(&self.kernel_k, &gt)?)?;
        let r = central_derivative(&heat)
            .add(&central_derivative(&latent))?
            .add(&apply(&g.transpose(), &flux)?)?
            .sub(&f)?;
        Ok(r.norm() / f.norm().max(f64::MIN_POSITIVE))
    }

    /// Relative residual of `q = -∂_0^{-1}(1 - K*) G θ`.
    pub fn flux_residual(&self, u: &WeightedSignal) -> Result<f64> {
        let n = self.cells - 1;
        let theta = u.slice_components(0..n)?;
        let q = u.slice_components(2 * n..2 * n + self.cells)?;
        let gt = apply(&self.gradient()?, &theta)?;
        let flux = gt.sub(&trapezoid_convolve(&self.kernel_k, &gt)?)?;
        let r = q.add(&trapezoid_antiderivative(&flux))?;
        Ok(r.norm() / q.norm().max(f64::MIN_POSITIVE))
    }
}

fn apply(m: &RMatrix, x: &WeightedSignal) -> Result<WeightedSignal> {
    let mut data = Vec::with_capacity(x.len() * m.nrows());
    for row in x.rows() {
        data.extend((m * nalgebra::DVector::from_column_slice(row)).iter());
    }
    WeightedSignal::new(*x.grid(), x.nu(), m.nrows(), data)
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    pub cells: usize,
    pub nu: f64,
    pub dt: f64,
    pub tmax: f64,
    pub kernel_k: HypothesisSummary,
    /// The `(θ, χ)` estimate and its balancing `ε²`.
    pub epsilon_bound: f64,
    pub epsilon_sq: f64,
    /// The estimate for the `q` block.
    pub flux_bound: f64,
    /// `min(epsilon_bound, flux_bound)`.
    pub analytic_margin: f64,
    pub margin: MarginSummary,
    /// The sampled margin is at least the analytic one.
    pub dominance_pass: bool,
    pub chi_min: f64,
    pub chi_max: f64,
    pub chi_in_bounds: bool,
    pub max_step_residual: f64,
    pub inner_iterations: usize,
    pub first_row_residual: f64,
    pub flux_residual: f64,
    pub causality: Vec<CausalitySummary>,
    pub lipschitz: LipschitzSummary,
}

impl PhaseReport {
    pub fn pass(&self) -> bool {
        self.kernel_k.pass
            && self.analytic_margin > 0.0
            && self.dominance_pass
            && self.margin.c_est > 0.0
            && self.chi_in_bounds
            && self.max_step_residual <= MONOTONE
            && self.causality.iter().all(|c| c.pass)
            && self.lipschitz.pass
    }
}

impl fmt::Display for PhaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "phase-transition run: cells = {}, nu = {}, dt = {}, tmax = {}", self.cells, self.nu, self.dt, self.tmax)?;
        write_hypotheses(f, "kernel K", &self.kernel_k)?;
        writeln!(
            f,
            "{:<24} {:.6e}  (theta, chi) = {:.6e} at eps^2 = {:.4e}  q = {:.6e}",
            "analytic margin", self.analytic_margin, self.epsilon_bound, self.epsilon_sq, self.flux_bound
        )?;
        write_margin(f, &self.margin)?;
        writeln!(f, "{:<24} {}", "sampled >= analytic", flag(self.dominance_pass))?;
        writeln!(
            f,
            "{:<24} {}  min = {:.6e}  max = {:.6e}",
            "chi in [0, 1]",
            flag(self.chi_in_bounds),
            self.chi_min,
            self.chi_max
        )?;
        writeln!(f, "{:<24} {:.3e}  inner iterations = {}", "max step residual", self.max_step_residual, self.inner_iterations)?;
        writeln!(f, "{:<24} {:.4e}", "first row residual", self.first_row_residual)?;
        writeln!(f, "{:<24} {:.4e}", "flux residual", self.flux_residual)?;
        write_harness(f, &self.causality, &self.lipschitz)?;
        write!(f, "overall: {}", flag(self.pass()))
    }
}

/// Checks `K`, evaluates the analytic margin, solves by the time stepper with the
/// relation resolved on `χ` and runs the harness. Without `force`, failing hypotheses or
/// a non-positive analytic margin abort the run.
pub fn run_phase(s: &PhaseTransitionScenario, force: bool) -> Result<ScenarioRun<PhaseReport>> {
    s.check()?;
    let kernel_k = HypothesisSummary::from(&check_hypotheses(&s.kernel_k, &HypothesisOptions::new(s.nu))?);
    if !force && !kernel_k.pass {
        return Err(Error::Hypothesis("flux kernel K".into()));
    }
    let (epsilon_bound, epsilon_sq) = phase_epsilon_bound(
        s.kernel_c.l1_weighted_norm(s.nu)?,
        s.kernel_d.l1_weighted_norm(s.nu)?,
        s.lambda,
        s.alpha,
        s.nu,
    );
    let flux_bound = hyp_b_bound(&s.kernel_k, kernel_k.d, s.nu, s.nu)?;
    let analytic_margin = epsilon_bound.min(flux_bound);
    if !force && !(analytic_margin > 0.0) {
        return Err(Error::MarginGate { c_est: analytic_margin });
    }

    let law = s.law()?;
    let grid = s.grid()?;
    let f = s.rhs()?;
    let stepper = TimeStepper::new(&law, &s.operator()?, &s.relations(), grid, s.nu, force)?;
    let time = stepper.solve_detailed(&f)?;
    let margin = MarginSummary::from(stepper.margin());
    let dominance_pass = margin.c_est >= analytic_margin - s.tolerances.quadrature;

    let n = s.cells - 1;
    let chi = time.solution.slice_components(n..2 * n)?;
    let chi_min = chi.data().iter().copied().fold(f64::INFINITY, f64::min);
    let chi_max = chi.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let causality = run_causality(&stepper, &f, &s.checks, s.tolerances.algebraic)?;
    let nodes: Vec<usize> = (0..n).collect();
    let lipschitz =
        run_lipschitz(&stepper, grid, s.nu, s.dim(), &nodes, &s.checks, margin.c_est, |x| causal_antiderivative(&x))?;

    let report = PhaseReport {
        cells: s.cells,
        nu: s.nu,
        dt: s.dt,
        tmax: s.tmax,
        kernel_k,
        epsilon_bound,
        epsilon_sq,
        flux_bound,
        analytic_margin,
        margin,
        dominance_pass,
        chi_min,
        chi_max,
        chi_in_bounds: chi_min >= 0.0 && chi_max <= 1.0,
        max_step_residual: time.max_step_residual,
        inner_iterations: time.inner_iterations,
        first_row_residual: s.first_row_residual(&time.solution)?,
        flux_residual: s.flux_residual(&time.solution)?,
        causality,
        lipschitz,
    };
    Ok(ScenarioRun { solution: time.solution, report })
}
