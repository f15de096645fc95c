//! `(∂_0 diag(ρ, C^{-1/2}(1 - C^{-1/2}(B*)C^{-1/2})^{-1}C^{-1/2}) + [[0, G^T], [-G, 0]]) (v, T) = (f, 0)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{
    flag, run_causality, run_lipschitz, write_harness, write_hypotheses, write_margin, CausalitySummary,
    HypothesisSummary, LipschitzSummary, MarginSummary, NodalSource, ScenarioChecks, ScenarioRun, TimeShape,
};
use crate::error::{Error, Result};
use crate::kernels::{check_hypotheses, default_sample_times, HypothesisOptions, OperatorKernel};
use crate::linalg::{op_norm_real, RMatrix};
use crate::material_laws::{BlockKind, MaterialLaw};
use crate::operators::{build_elasticity_1d, BlockOperator, Elasticity};
use crate::solver::{FrequencySolver, TimeStepper};
use crate::tolerances::{Tolerances, MONOTONE};
use crate::weighted_space::{TimeGrid, WeightedSignal};

/// Cross-solver agreement required of the default run.
const CROSS_TOL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ViscoElasticScenario {
    pub cells: usize,
    pub length: f64,
    /// Density at the `cells - 1` interior nodes.
    pub rho: Vec<f64>,
    /// Diagonal stiffness, one value per cell.
    pub c: Vec<f64>,
    /// Relaxation kernel on cell stresses.
    pub kernel: OperatorKernel,
    pub source: NodalSource,
    pub nu: f64,
    pub dt: f64,
    pub tmax: f64,
    /// Also run the frequency solver and compare.
    pub cross_validate: bool,
    pub checks: ScenarioChecks,
    pub tolerances: Tolerances,
}

impl Default for ViscoElasticScenario {
    fn default() -> Self {
        let cells = 64;
        Self {
            cells,
            length: 1.0,
            rho: vec![1.0; cells - 1],
            c: vec![1.0; cells],
            kernel: OperatorKernel::exponential(1.0, DMatrix::identity(cells, cells) * 0.5).expect("valid kernel"),
            source: NodalSource { amplitude: 1.0, shape: TimeShape::Pulse { center: 0.5, width: 0.1 } },
            nu: 4.0,
            dt: 1.0 / 256.0,
            tmax: 4.0,
            cross_validate: true,
            checks: ScenarioChecks::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl ViscoElasticScenario {
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn dim(&self) -> usize {
        2 * self.cells - 1
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::spanning(0.0, self.tmax, self.dt)
    }

    pub fn elasticity(&self) -> Result<Elasticity> {
        if self.c.len() != self.cells {
            return Err(Error::DimensionMismatch(format!("C needs {} cell values, got {}", self.cells, self.c.len())));
        }
        let c = DMatrix::from_diagonal(&DVector::from_column_slice(&self.c));
        build_elasticity_1d(self.cells, self.h(), &self.rho, &c)
    }

    /// `C^{-1/2} B(·) C^{-1/2}`.
    pub fn conjugated_kernel(&self) -> Result<OperatorKernel> {
        self.kernel.conjugated(&self.elasticity()?.c_inv_sqrt)
    }

    pub fn law(&self) -> Result<MaterialLaw> {
        let el = self.elasticity()?;
        let conj = self.kernel.conjugated(&el.c_inv_sqrt)?;
        MaterialLaw::new(vec![("v".into(), self.cells - 1), ("T".into(), self.cells)])
            .with_entry("v", "v", BlockKind::Const(el.rho.clone()))?
            .with_conjugated_entry("T", "T", BlockKind::Hyp1(conj), el.c_inv_sqrt)
    }

    pub fn operator(&self) -> Result<BlockOperator> {
        Ok(self.elasticity()?.a)
    }

    /// `(f, 0)` on the grid of this scenario.
    pub fn rhs(&self) -> Result<WeightedSignal> {
        self.source.signal(self.grid()?, self.nu, self.cells, self.length, self.dim(), 0)
    }

    /// `½ h (Σ ρ v² + Σ T² / c)` per sample.
    pub fn energy(&self, u: &WeightedSignal) -> Vec<f64> {
        let nv = self.cells - 1;
        u.rows()
            .map(|x| {
                let kinetic: f64 = x[..nv].iter().zip(&self.rho).map(|(v, r)| r * v * v).sum();
                let strain: f64 = x[nv..].iter().zip(&self.c).map(|(t, c)| t * t / c).sum();
                0.5 * self.h() * (kinetic + strain)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ViscoReport {
    pub cells: usize,
    pub nu: f64,
    pub dt: f64,
    pub tmax: f64,
    pub kernel: HypothesisSummary,
    pub conjugated: HypothesisSummary,
    /// `d · ‖C^{-1/2}‖²`, the admissible `d` of the conjugated kernel.
    pub conjugated_d_bound: f64,
    pub conjugated_d_pass: bool,
    /// `max_t ‖C B(t) - B(t) C‖ / (‖C‖ ‖B(t)‖)`.
    pub commute_defect: f64,
    pub commute_pass: bool,
    pub margin: MarginSummary,
    pub max_step_residual: f64,
    pub frequency_residual: Option<f64>,
    /// Relative weighted distance of the time and frequency solutions.
    pub cross_error: Option<f64>,
    pub energy_peak: f64,
    pub energy_final: f64,
    pub causality: Vec<CausalitySummary>,
    pub lipschitz: LipschitzSummary,
}

impl ViscoReport {
    pub fn pass(&self) -> bool {
        self.kernel.pass
            && self.conjugated.pass
            && self.conjugated_d_pass
            && self.commute_pass
            && self.margin.c_est > 0.0
            && self.max_step_residual <= MONOTONE
            && self.cross_error.is_none_or(|e| e <= CROSS_TOL)
            && self.causality.iter().all(|c| c.pass)
            && self.lipschitz.pass
    }
}

impl fmt::Display for ViscoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "visco-elastic run: cells = {}, nu = {}, dt = {}, tmax = {}", self.cells, self.nu, self.dt, self.tmax)?;
        write_hypotheses(f, "kernel B", &self.kernel)?;
        write_hypotheses(f, "kernel C^-1/2 B C^-1/2", &self.conjugated)?;
        writeln!(
            f,
            "{:<24} {}  d' = {:.3e}  d |C^-1/2|^2 = {:.3e}",
            "conjugated d",
            flag(self.conjugated_d_pass),
            self.conjugated.d,
            self.conjugated_d_bound
        )?;
        writeln!(f, "{:<24} {}  defect = {:.3e}", "C commutes with B", flag(self.commute_pass), self.commute_defect)?;
        write_margin(f, &self.margin)?;
        writeln!(f, "{:<24} {:.3e}", "max step residual", self.max_step_residual)?;
        if let Some(r) = self.frequency_residual {
            writeln!(f, "{:<24} {:.3e}", "frequency residual", r)?;
        }
        if let Some(e) = self.cross_error {
            writeln!(f, "{:<24} {}  relative = {:.4e}  tol = {CROSS_TOL}", "time vs frequency", flag(e <= CROSS_TOL), e)?;
        }
        writeln!(f, "{:<24} peak = {:.6e}  final = {:.6e}", "energy", self.energy_peak, self.energy_final)?;
        write_harness(f, &self.causality, &self.lipschitz)?;
        write!(f, "overall: {}", flag(self.pass()))
    }
}

fn commute_defect(c: &RMatrix, b: &OperatorKernel) -> f64 {
    let cn = op_norm_real(c);
    default_sample_times(b)
        .into_iter()
        .map(|t| {
            let bt = b.eval(t);
            let scale = cn * op_norm_real(&bt);
            if scale == 0.0 {
                0.0
            } else {
                op_norm_real(&(c * &bt - &bt * c)) / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Checks the kernel hypotheses, solves in time (and in frequency when enabled) and runs
/// the causality and Lipschitz harness. Without `force`, failing hypotheses or a
/// non-positive margin abort the run.
pub fn run_visco(s: &ViscoElasticScenario, force: bool) -> Result<ScenarioRun<ViscoReport>> {
    if s.kernel.dim() != s.cells {
        return Err(Error::DimensionMismatch(format!("kernel acts on {} cells, scenario has {}", s.kernel.dim(), s.cells)));
    }
    let el = s.elasticity()?;
    let opts = HypothesisOptions::new(s.nu);
    let kernel = HypothesisSummary::from(&check_hypotheses(&s.kernel, &opts)?);
    let commute = commute_defect(&el.c, &s.kernel);
    let commute_pass = commute <= s.tolerances.structural;
    if !force && !(kernel.pass && commute_pass) {
        return Err(Error::Hypothesis(format!(
            "relaxation kernel: hypotheses {}, commutation defect {commute:.3e}",
            flag(kernel.pass)
        )));
    }
    let conj_kernel = s.kernel.conjugated(&el.c_inv_sqrt)?;
    let conjugated = HypothesisSummary::from(&check_hypotheses(&conj_kernel, &opts)?);
    let c_inv = op_norm_real(&el.c_inv_sqrt);
    let conjugated_d_bound = kernel.d * c_inv * c_inv;
    let conjugated_d_pass = conjugated.d <= conjugated_d_bound + s.tolerances.structural * conjugated_d_bound.max(1.0);

    let law = s.law()?;
    let grid = s.grid()?;
    let f = s.rhs()?;
    let stepper = TimeStepper::new(&law, &el.a, &[], grid, s.nu, force)?;
    let time = stepper.solve_detailed(&f)?;
    let margin = MarginSummary::from(stepper.margin());

    let (frequency_residual, cross_error) = if s.cross_validate {
        let fs = FrequencySolver::new(&law, &el.a, grid, s.nu, force)?.solve_detailed(&f)?;
        let err = time.solution.sub(&fs.solution)?.norm() / fs.solution.norm().max(f64::MIN_POSITIVE);
        (Some(fs.residual), Some(err))
    } else {
        (None, None)
    };

    let energy = s.energy(&time.solution);
    let causality = run_causality(&stepper, &f, &s.checks, s.tolerances.algebraic)?;
    let nodes: Vec<usize> = (0..s.cells - 1).collect();
    let lipschitz = run_lipschitz(&stepper, grid, s.nu, s.dim(), &nodes, &s.checks, margin.c_est, |x| x)?;

    let report = ViscoReport {
        cells: s.cells,
        nu: s.nu,
        dt: s.dt,
        tmax: s.tmax,
        kernel,
        conjugated,
        conjugated_d_bound,
        conjugated_d_pass,
        commute_defect: commute,
        commute_pass,
        margin,
        max_step_residual: time.max_step_residual,
        frequency_residual,
        cross_error,
        energy_peak: energy.iter().copied().fold(0.0, f64::max),
        energy_final: energy.last().copied().unwrap_or(0.0),
        causality,
        lipschitz,
    };
    Ok(ScenarioRun { solution: time.solution, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{build_ivp_rhs, SolveOperator};

    fn small(beta: f64) -> ViscoElasticScenario {
        let cells = 16;
        ViscoElasticScenario {
            cells,
            rho: vec![1.0; cells - 1],
            c: vec![1.0; cells],
            kernel: OperatorKernel::exponential(1.0, DMatrix::identity(cells, cells) * beta).unwrap(),
            tmax: 2.0,
            dt: 1.0 / 128.0,
            checks: ScenarioChecks { causality_times: vec![0.5, 1.0], lipschitz_pairs: 3, ..Default::default() },
            ..Default::default()
        }
    }

    /// Energy trace after an initial velocity with `f = 0`.
    fn impulse_energy(s: &ViscoElasticScenario) -> Vec<f64> {
        let law = s.law().unwrap();
        let grid = s.grid().unwrap();
        let mut x0 = vec![0.0; s.dim()];
        for (i, x) in x0.iter_mut().take(s.cells - 1).enumerate() {
            *x = (std::f64::consts::PI * (i + 1) as f64 * s.h()).sin();
        }
        let f = WeightedSignal::zeros(grid, s.nu, s.dim()).unwrap();
        let rhs = build_ivp_rhs(&law, &x0, &f).unwrap();
        let u = TimeStepper::new(&law, &s.operator().unwrap(), &[], grid, s.nu, false).unwrap().solve(&rhs).unwrap();
        s.energy(&u)
    }

    #[test]
    fn acoustic_energy_is_conserved_to_first_order() {
        let mut drift = Vec::new();
        for dt in [1.0 / 64.0, 1.0 / 128.0] {
            let s = ViscoElasticScenario { dt, ..small(0.0) };
            let e = impulse_energy(&s);
            drift.push((e[0] - e[e.len() - 1]).abs() / e[0]);
        }
        assert!(drift[1] < 0.2, "{drift:?}");
        let ratio = drift[0] / drift[1];
        assert!((1.5..2.5).contains(&ratio), "{drift:?}");
    }

    #[test]
    fn relaxation_damps_the_wave() {
        let free = impulse_energy(&small(0.0));
        let damped = impulse_energy(&small(0.3));
        assert!(damped.last().unwrap() < free.last().unwrap());
    }

    #[test]
    fn small_run_passes_its_checks() {
        let run = run_visco(&small(0.5), false).unwrap();
        assert!(run.report.pass(), "{}", run.report);
        assert!(run.report.kernel.d_est <= 1e-12);
        assert!(run.report.to_string().contains("overall: pass"));
    }

    #[test]
    fn conjugation_scales_d_by_the_stiffness() {
        let mut s = small(0.5);
        s.c = (0..s.cells).map(|i| 1.0 + i as f64 / s.cells as f64).collect();
        s.checks.lipschitz_pairs = 1;
        s.cross_validate = false;
        let run = run_visco(&s, false).unwrap();
        assert!(run.report.commute_pass && run.report.conjugated_d_pass, "{}", run.report);
    }

    #[test]
    fn non_commuting_stiffness_is_refused() {
        let mut s = small(0.0);
        let mut m = DMatrix::identity(s.cells, s.cells) * 0.3;
        m[(0, 1)] = 0.1;
        m[(1, 0)] = 0.1;
        s.kernel = OperatorKernel::exponential(1.0, m).unwrap();
        s.c = (0..s.cells).map(|i| 1.0 + i as f64).collect();
        assert!(matches!(run_visco(&s, false), Err(Error::Hypothesis(_))));
    }
}
