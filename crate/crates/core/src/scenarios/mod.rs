//! The two worked examples as runnable problems on a 1D staggered grid: a visco-elastic
//! wave system with a relaxation kernel and a three-field phase-transition inclusion.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::HypothesisReport;
use crate::material_laws::SolvabilityReport;
use crate::solver::{causality_check, lipschitz_check, random_rhs, SolveOperator};
use crate::weighted_space::{TimeGrid, WeightedSignal};

mod phase;
mod visco;

pub use phase::{phase_epsilon_bound, run_phase, PhaseReport, PhaseTransitionScenario};
pub use visco::{run_visco, ViscoElasticScenario, ViscoReport};

/// Time profile of a source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeShape {
    /// `exp(-((t - center)/width)²)`.
    Pulse { center: f64, width: f64 },
    /// `1 - exp(-(t/rise)²)`, switched on at `t = 0`.
    Ramp { rise: f64 },
}

impl TimeShape {
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            TimeShape::Pulse { center, width } => (-((t - center) / width).powi(2)).exp(),
            TimeShape::Ramp { rise } => 1.0 - (-(t / rise).powi(2)).exp(),
        }
    }
}

/// `amplitude · shape(t) · sin(pi x / L)` on the interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalSource {
    pub amplitude: f64,
    #[serde(flatten)]
    pub shape: TimeShape,
}

impl NodalSource {
    /// Samples on the `cells - 1` interior nodes of `[0, length]`, placed at components
    /// `offset..` of a `dim`-dimensional signal.
    pub fn signal(&self, grid: TimeGrid, nu: f64, cells: usize, length: f64, dim: usize, offset: usize) -> Result<WeightedSignal> {
        let h = length / cells as f64;
        let spatial: Vec<f64> = (1..cells).map(|i| (PI * i as f64 * h / length).sin()).collect();
        WeightedSignal::from_fn(grid, nu, dim, |t, v| {
            v.iter_mut().for_each(|x| *x = 0.0);
            let a = self.amplitude * self.shape.eval(t);
            for (x, s) in v[offset..offset + spatial.len()].iter_mut().zip(&spatial) {
                *x = a * s;
            }
        })
    }
}

/// Harness settings shared by both scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioChecks {
    /// Cut-off times of the causality check.
    pub causality_times: Vec<f64>,
    pub lipschitz_pairs: usize,
    pub seed: u64,
}

impl Default for ScenarioChecks {
    fn default() -> Self {
        Self { causality_times: vec![1.0, 2.0, 3.0], lipschitz_pairs: 20, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisSummary {
    pub pass: bool,
    pub l1_norm: f64,
    pub selfadjoint_defect: f64,
    pub commuting_defect: f64,
    pub d_est: f64,
    pub d: f64,
    pub propagation_pass: bool,
}

impl From<&HypothesisReport> for HypothesisSummary {
    fn from(r: &HypothesisReport) -> Self {
        Self {
            pass: r.pass(),
            l1_norm: r.l1_norm,
            selfadjoint_defect: r.selfadjoint.value,
            commuting_defect: r.commuting.value,
            d_est: r.d_est,
            d: r.d,
            propagation_pass: r.propagation.pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginSummary {
    pub c_est: f64,
    pub analytic_bound: Option<f64>,
    pub label: String,
    pub worst_xi: f64,
    pub worst_nu: f64,
}

impl From<&SolvabilityReport> for MarginSummary {
    fn from(r: &SolvabilityReport) -> Self {
        Self {
            c_est: r.c_est,
            analytic_bound: r.analytic_bound,
            label: r.label().to_string(),
            worst_xi: r.worst_xi,
            worst_nu: r.worst_nu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalitySummary {
    pub a: f64,
    pub leakage: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzSummary {
    pub pairs: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Solution and report of a scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioRun<R> {
    pub solution: WeightedSignal,
    pub report: R,
}

pub(crate) fn run_causality(
    solver: &dyn SolveOperator,
    f: &WeightedSignal,
    checks: &ScenarioChecks,
    tol: f64,
) -> Result<Vec<CausalitySummary>> {
    checks
        .causality_times
        .iter()
        .map(|&a| {
            let r = causality_check(solver, f, a, tol)?;
            Ok(CausalitySummary { a, leakage: r.leakage, pass: r.pass })
        })
        .collect()
}

/// Random right-hand sides are passed through `shape` before solving, so scenarios can
/// apply the same preprocessing as their physical source.
pub(crate) fn run_lipschitz<S>(
    solver: &dyn SolveOperator,
    grid: TimeGrid,
    nu: f64,
    dim: usize,
    components: &[usize],
    checks: &ScenarioChecks,
    c_est: f64,
    shape: S,
) -> Result<LipschitzSummary>
where
    S: Fn(WeightedSignal) -> WeightedSignal,
{
    let mut max_ratio: f64 = 0.0;
    let mut pass = true;
    for k in 0..checks.lipschitz_pairs as u64 {
        let seed = checks.seed.wrapping_mul(1000).wrapping_add(2 * k);
        let f1 = shape(random_rhs(grid, nu, dim, components, seed)?);
        let f2 = shape(random_rhs(grid, nu, dim, components, seed + 1)?);
        let r = lipschitz_check(solver, &f1, &f2, c_est)?;
        max_ratio = max_ratio.max(r.ratio);
        pass &= r.pass;
    }
    Ok(LipschitzSummary { pairs: checks.lipschitz_pairs, max_ratio, bound: 1.0 / c_est, pass })
}

pub(crate) fn flag(p: bool) -> &'static str {
    if p {
        "pass"
    } else {
        "FAIL"
    }
}

pub(crate) fn write_hypotheses(f: &mut fmt::Formatter<'_>, name: &str, h: &HypothesisSummary) -> fmt::Result {
    writeln!(
        f,
        "{name:<24} {}  |B|_L1 = {:.6e}  d_est = {:.3e}  selfadjoint = {:.2e}  commuting = {:.2e}  4d = {}",
        flag(h.pass),
        h.l1_norm,
        h.d_est,
        h.selfadjoint_defect,
        h.commuting_defect,
        flag(h.propagation_pass)
    )
}

pub(crate) fn write_margin(f: &mut fmt::Formatter<'_>, m: &MarginSummary) -> fmt::Result {
    let analytic = m.analytic_bound.map_or("n/a".to_string(), |b| format!("{b:.6e}"));
    writeln!(
        f,
        "{:<24} {}  c_est = {:.6e}  analytic = {analytic}  worst at (xi, nu) = ({:.3e}, {:.3e})",
        "margin", m.label, m.c_est, m.worst_xi, m.worst_nu
    )
}

pub(crate) fn write_harness(f: &mut fmt::Formatter<'_>, c: &[CausalitySummary], l: &LipschitzSummary) -> fmt::Result {
    for r in c {
        writeln!(f, "{:<24} {}  a = {:.3}  leakage = {:.3e}", "causality", flag(r.pass), r.a, r.leakage)?;
    }
    writeln!(
        f,
        "{:<24} {}  pairs = {}  max ratio = {:.6e}  1/c_est = {:.6e}",
        "lipschitz",
        flag(l.pass),
        l.pairs,
        l.max_ratio,
        l.bound
    )
}
