//! Causality and Lipschitz checks against any solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::weighted_space::{weighted_norm_up_to, TimeGrid, WeightedSignal};

/// A solution operator `F ↦ U`.
pub trait SolveOperator {
    fn solve(&self, f: &WeightedSignal) -> Result<WeightedSignal>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalityReport {
    pub pass: bool,
    pub a: f64,
    /// `‖χ_{<=a}(U(F) - U(χ_{<=a} F))‖_nu`.
    pub leakage: f64,
    pub tol: f64,
}

/// Compares the solution for `F` with the solution for `F` cut off after `a`.
pub fn causality_check(solver: &dyn SolveOperator, f: &WeightedSignal, a: f64, tol: f64) -> Result<CausalityReport> {
    let u1 = solver.solve(f)?;
    let u2 = solver.solve(&f.cut_after(a))?;
    let leakage = weighted_norm_up_to(&u1.sub(&u2)?, a);
    Ok(CausalityReport { pass: leakage <= tol, a, leakage, tol })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub pass: bool,
    /// `‖U1 - U2‖ / ‖F1 - F2‖`, zero for equal inputs.
    pub ratio: f64,
    /// `1/c_est`.
    pub bound: f64,
}

/// Slack on `1/c_est` absorbing the grid quadrature of the norms.
const LIPSCHITZ_SLACK: f64 = 1e-3;

pub fn lipschitz_check(
    solver: &dyn SolveOperator,
    f1: &WeightedSignal,
    f2: &WeightedSignal,
    c_est: f64,
) -> Result<LipschitzReport> {
    let df = f1.sub(f2)?.norm();
    let bound = 1.0 / c_est;
    if df == 0.0 {
        return Ok(LipschitzReport { pass: true, ratio: 0.0, bound });
    }
    let du = solver.solve(f1)?.sub(&solver.solve(f2)?)?.norm();
    let ratio = du / df;
    Ok(LipschitzReport { pass: c_est > 0.0 && ratio <= bound * (1.0 + LIPSCHITZ_SLACK), ratio, bound })
}

/// Seeded random right-hand side: smooth random bumps on the listed components, zero
/// before `t = 0`.
pub fn random_rhs(grid: TimeGrid, nu: f64, dim: usize, components: &[usize], seed: u64) -> Result<WeightedSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = grid.end().max(0.0);
    let bumps: Vec<(usize, f64, f64, f64)> = (0..6)
        .map(|_| {
            let c = components[rng.random_range(0..components.len())];
            (c, rng.random_range(-1.0..1.0), rng.random_range(0.0..span), rng.random_range(0.05..0.5))
        })
        .collect();
    let spatial: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    WeightedSignal::from_fn(grid, nu, dim, |t, v| {
        v.iter_mut().for_each(|x| *x = 0.0);
        if t < 0.0 {
            return;
        }
        for &(c, amp, center, width) in &bumps {
            v[c] += amp * (-((t - center) / width).powi(2)).exp();
        }
        for (x, s) in v.iter_mut().zip(&spatial) {
            *x *= s;
        }
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::material_laws::{BlockKind, MaterialLaw};
    use crate::operators::BlockOperator;
    use crate::solver::TimeStepper;

    fn integrator(grid: TimeGrid, nu: f64) -> TimeStepper {
        let law = MaterialLaw::single(1, BlockKind::Const(DMatrix::identity(1, 1))).unwrap();
        TimeStepper::new(&law, &BlockOperator::zero(vec![("u".into(), 1)]), &[], grid, nu, false).unwrap()
    }

    #[test]
    fn late_input_does_not_reach_the_past() {
        let grid = TimeGrid::new(0.0, 0.01, 400).unwrap();
        let s = integrator(grid, 1.0);
        let f = WeightedSignal::scalar_from_fn(grid, 1.0, |t| if t > 2.0 { 1.0 } else { 0.0 }).unwrap();
        let u = s.solve(&f).unwrap();
        assert_eq!(weighted_norm_up_to(&u, 2.0), 0.0);
        let r = causality_check(&s, &f, 2.0, 1e-10).unwrap();
        assert!(r.pass && r.leakage == 0.0);
    }

    #[test]
    fn early_input_is_unchanged_by_the_cut() {
        let grid = TimeGrid::new(0.0, 0.01, 400).unwrap();
        let s = integrator(grid, 1.0);
        let f = WeightedSignal::scalar_from_fn(grid, 1.0, |t| if t <= 1.0 { t } else { 0.0 }).unwrap();
        assert_eq!(f.cut_after(1.5), f);
        assert_eq!(causality_check(&s, &f, 1.5, 0.0).unwrap().leakage, 0.0);
    }

    #[test]
    fn integration_ratio_is_below_one_over_nu() {
        let nu = 2.0;
        let grid = TimeGrid::new(0.0, 0.005, 1600).unwrap();
        let s = integrator(grid, nu);
        for seed in 0..5 {
            let f1 = random_rhs(grid, nu, 1, &[0], seed).unwrap();
            let f2 = random_rhs(grid, nu, 1, &[0], seed + 100).unwrap();
            let r = lipschitz_check(&s, &f1, &f2, nu).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(lipschitz_check(&s, &f1, &f1, nu).unwrap().ratio == 0.0);
        }
    }
}
