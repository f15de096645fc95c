//! Solvability margin `Re z^{-1} M(z) >= c` on sampled `(xi, nu)` grids and the analytic
//! lower bounds for the individual block kinds.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{BlockKind, MaterialLaw};
use crate::error::{Error, Result};
use crate::kernels::{check_selfadjoint, default_sample_times, estimate_im_bound, positive_frequency_grid, OperatorKernel};
use crate::linalg::{hermitian_part, lambda_max, lambda_min, op_norm, to_complex, CMatrix, RMatrix};

/// Sample points of the margin scan.
#[derive(Debug, Clone)]
pub struct MarginGrid {
    /// Frequencies `xi >= 0`. Real kernels give `M(conj z) = conj M(z)`, so the
    /// negative half carries the same eigenvalues.
    pub xis: Vec<f64>,
    pub nus: Vec<f64>,
}

impl MarginGrid {
    /// `xi ∈ {0} ∪ logspace(1e-2, 1e3)`, `nu ∈ nu_min · {1, 1.5, 2, 4, 8, 16}`.
    pub fn standard(r1: f64) -> Self {
        let nu_min = 1.0 / (2.0 * r1);
        let mut xis = vec![0.0];
        xis.extend(positive_frequency_grid(1e-2, 1e3, 8));
        let nus = [1.0, 1.5, 2.0, 4.0, 8.0, 16.0].iter().map(|f| f * nu_min).collect();
        Self { xis, nus }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvabilityReport {
    pub c_est: f64,
    pub nu_min: f64,
    pub worst_xi: f64,
    pub worst_nu: f64,
    /// `z = 1/(i worst_xi + worst_nu)`.
    pub worst_z: Complex64,
    pub analytic_bound: Option<f64>,
}

impl SolvabilityReport {
    /// Positive analytic bound: the margin is proven, not only sampled.
    pub fn certified(&self) -> bool {
        self.analytic_bound.is_some_and(|b| b > 0.0)
    }

    pub fn label(&self) -> &'static str {
        if self.certified() {
            "certified"
        } else if self.c_est > 0.0 {
            "sampled"
        } else {
            "failed"
        }
    }
}

impl fmt::Display for SolvabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c_est          {:.9e}", self.c_est)?;
        writeln!(f, "nu_min         {:.9e}", self.nu_min)?;
        writeln!(f, "worst (xi, nu) ({:.6e}, {:.6e})", self.worst_xi, self.worst_nu)?;
        writeln!(f, "worst z        {:.6e}{:+.6e}i", self.worst_z.re, self.worst_z.im)?;
        match self.analytic_bound {
            Some(b) => writeln!(f, "analytic bound {b:.9e}")?,
            None => writeln!(f, "analytic bound none")?,
        }
        write!(f, "status         {}", self.label())
    }
}

/// Groups of fields coupled by some entry; the Hermitian part is block diagonal over them.
fn coupled_groups(law: &MaterialLaw) -> Vec<Vec<usize>> {
    let n = law.fields().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for e in law.entries() {
        let (a, b) = (find(&mut parent, e.row), find(&mut parent, e.col));
        parent[a] = b;
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

fn group_indices(law: &MaterialLaw, group: &[usize]) -> Vec<usize> {
    group.iter().flat_map(|&f| law.field_range(f)).collect()
}

/// `λ_min` of the Hermitian part of `(i xi + nu) M`, computed per coupled group.
pub(crate) fn symbol_lambda_min(law: &MaterialLaw, xi: f64, nu: f64) -> Result<f64> {
    let s = law.symbol(xi, nu)?;
    let h = hermitian_part(&s);
    let mut best = f64::INFINITY;
    for g in coupled_groups(law) {
        let idx = group_indices(law, &g);
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
        best = best.min(lambda_min(&sub));
    }
    Ok(best)
}

/// `c_est = min λ_min(Herm((i xi + nu) M))` over the grid.
pub fn solvability_margin(law: &MaterialLaw, r1: f64, grid: &MarginGrid) -> Result<SolvabilityReport> {
    if !(r1 > 0.0) || r1 > law.radius() {
        return Err(Error::Precondition(format!("r1 = {r1} must lie in (0, {}]", law.radius())));
    }
    let nu_min = 1.0 / (2.0 * r1);
    if let Some(bad) = grid.nus.iter().find(|&&nu| nu < nu_min * (1.0 - 1e-12)) {
        return Err(Error::Precondition(format!("nu = {bad} below nu_min = {nu_min}")));
    }
    let points: Vec<(f64, f64)> = grid.nus.iter().flat_map(|&nu| grid.xis.iter().map(move |&xi| (xi, nu))).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(xi, nu)| symbol_lambda_min(law, xi, nu))
        .collect::<Result<_>>()?;
    let (k, c_est) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let (worst_xi, worst_nu) = points[k];
    Ok(SolvabilityReport {
        c_est,
        nu_min,
        worst_xi,
        worst_nu,
        worst_z: Complex64::new(worst_nu, worst_xi).inv(),
        analytic_bound: analytic_margin(law, r1),
    })
}

/// `nu (1 - |C|_{L1,nu}) - 4 sqrt(2 pi) d`.
pub fn hyp_c_bound(c: &OperatorKernel, d: f64, nu: f64) -> Result<f64> {
    Ok(nu * (1.0 - c.l1_weighted_norm(nu)?) - 4.0 * (2.0 * PI).sqrt() * d)
}

/// `(nu (1 - |B|_{L1,nu0}) - 4 sqrt(2 pi) d) / (1 + |B|_{L1,nu0})²`.
pub fn hyp_b_bound(b: &OperatorKernel, d: f64, nu0: f64, nu: f64) -> Result<f64> {
    if nu < nu0 {
        return Err(Error::Precondition(format!("nu = {nu} below nu0 = {nu0}")));
    }
    let l1 = b.l1_weighted_norm(nu0)?;
    if l1 >= 1.0 {
        return Err(Error::Precondition(format!("|B|_L1 = {l1} at nu0 = {nu0} is not below 1")));
    }
    Ok((nu * (1.0 - l1) - 4.0 * (2.0 * PI).sqrt() * d) / ((1.0 + l1) * (1.0 + l1)))
}

/// `nu - (|B'|_{L1,nu} + ‖B(0)‖) / (1 - |B|_{L1,nu})` for absolutely continuous `B`.
pub fn abs_cont_bound(b: &OperatorKernel, b_prime: &OperatorKernel, b0: &RMatrix, nu: f64) -> Result<f64> {
    let l1 = b.l1_weighted_norm(nu)?;
    if l1 >= 1.0 {
        return Err(Error::Precondition(format!("|B|_L1 = {l1} at nu = {nu} is not below 1")));
    }
    let b0_norm = crate::linalg::op_norm_real(b0);
    Ok(nu - (b_prime.l1_weighted_norm(nu)? + b0_norm) / (1.0 - l1))
}

/// `1 - s` for `Par2` and `1 - s/(1 - s)` for `Par3`, with
/// `s = sup ‖sqrt(2 pi) K̂‖` sampled on the boundary line `nu = 1/(2r)`.
pub fn parabolic_margin(block: &BlockKind, r: f64) -> Result<f64> {
    let nu = 1.0 / (2.0 * r);
    let (k, resolvent) = match block {
        BlockKind::Par2(k) => (k, false),
        BlockKind::Par3(k) => (k, true),
        other => {
            return Err(Error::Precondition(format!("parabolic margin needs Par2 or Par3, got {}", other.label())));
        }
    };
    let mut xis = vec![0.0];
    xis.extend(positive_frequency_grid(1e-3, 1e4, 20));
    let s = xis
        .iter()
        .map(|&xi| k.laplace(Complex64::new(nu, xi)).map(|m| op_norm(&m)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if !resolvent {
        return Ok(1.0 - s);
    }
    if s >= 1.0 {
        return Err(Error::Precondition(format!("sup |sqrt(2 pi) B̂| = {s} is not below 1")));
    }
    Ok(1.0 - s / (1.0 - s))
}

fn im_constant(k: &OperatorKernel, nu0: f64) -> Option<f64> {
    if !check_selfadjoint(k, &default_sample_times(k)).pass {
        return None;
    }
    let xis = positive_frequency_grid(1e-3, 1e4, 40);
    estimate_im_bound(k, nu0, &xis).ok().map(|d| d.max(0.0))
}

/// Lower bound for `Re z^{-1} M(z)` over `nu >= 1/(2 r1)` built from the per-block
/// analytic estimates. Available for block-diagonal laws only.
pub fn analytic_margin(law: &MaterialLaw, r1: f64) -> Option<f64> {
    let nu = 1.0 / (2.0 * r1);
    let mut seen = vec![false; law.fields().len()];
    let mut bound = f64::INFINITY;
    for e in law.entries() {
        if e.row != e.col {
            return None;
        }
        seen[e.row] = true;
        let b = match &e.kind {
            BlockKind::Const(m) => {
                let l = lambda_min(&to_complex(&sym(m)));
                if l < 0.0 || !crate::linalg::is_symmetric(m, 1e-12) {
                    return None;
                }
                nu * l
            }
            BlockKind::ZConst(n) => lambda_min(&to_complex(&sym(n))),
            BlockKind::Hyp0(c) => hyp_c_bound(c, im_constant(c, nu)?, nu).ok()?,
            BlockKind::Hyp1(b) => hyp_b_bound(b, im_constant(b, nu)?, nu, nu).ok()?,
            BlockKind::Par2(_) | BlockKind::Par3(_) => parabolic_margin(&e.kind, r1).ok()?,
        };
        let b = match &e.congruence {
            Some(s) => {
                let s2 = to_complex(&(s * s));
                if b >= 0.0 {
                    b * lambda_min(&s2)
                } else {
                    b * lambda_max(&s2)
                }
            }
            None => b,
        };
        bound = bound.min(b);
    }
    if seen.iter().any(|s| !s) {
        // An empty diagonal block has margin 0.
        bound = bound.min(0.0);
    }
    bound.is_finite().then_some(bound)
}

fn sym(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize) -> RMatrix {
        RMatrix::identity(n, n)
    }

    #[test]
    fn constant_law_margin_is_nu_min() {
        let r1 = 0.25;
        let law = MaterialLaw::single(3, BlockKind::Const(eye(3))).unwrap();
        let rep = solvability_margin(&law, r1, &MarginGrid::standard(r1)).unwrap();
        assert!((rep.c_est - 2.0).abs() < 1e-14);
        assert!(rep.certified());
        let law = MaterialLaw::single(3, BlockKind::Const(eye(3) * 2.0)).unwrap();
        let rep = solvability_margin(&law, r1, &MarginGrid::standard(r1)).unwrap();
        assert!((rep.c_est - 4.0).abs() < 1e-14);
    }

    #[test]
    fn nu_below_minimum_is_rejected() {
        let law = MaterialLaw::single(1, BlockKind::Const(eye(1))).unwrap();
        let grid = MarginGrid { xis: vec![0.0], nus: vec![0.1] };
        assert!(solvability_margin(&law, 1.0, &grid).is_err());
    }

    #[test]
    fn bound_examples() {
        let z = OperatorKernel::zero(2);
        assert_eq!(hyp_c_bound(&z, 0.0, 3.0).unwrap(), 3.0);
        let e = OperatorKernel::exponential(1.0, eye(2)).unwrap();
        assert!((hyp_c_bound(&e, 0.0, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        let tiny = e.scaled(1e-9);
        assert!((hyp_c_bound(&tiny, 0.0, 2.0).unwrap() - 2.0).abs() < 1e-8);
        assert_eq!(hyp_b_bound(&z, 0.0, 1.0, 4.0).unwrap(), 4.0);
        assert!((hyp_b_bound(&e, 0.0, 1.0, 4.0).unwrap() - 8.0 / 9.0).abs() < 1e-14);
        assert!(hyp_b_bound(&e.scaled(3.0), 0.0, 1.0, 4.0).is_err());
        assert_eq!(abs_cont_bound(&z, &z, &RMatrix::zeros(2, 2), 4.0).unwrap(), 4.0);
        let v = abs_cont_bound(&e, &e.scaled(-1.0), &eye(2), 4.0).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
        // nu - ‖B(0)‖ grows without bound while the quotient tends to ‖B(0)‖.
        let big = abs_cont_bound(&e, &e.scaled(-1.0), &eye(2), 1e6).unwrap();
        assert!((1e6 - big - 1.0).abs() < 1e-5);
    }

    #[test]
    fn parabolic_margin_examples() {
        let z = OperatorKernel::zero(2);
        assert_eq!(parabolic_margin(&BlockKind::Par2(z.clone()), 0.5).unwrap(), 1.0);
        assert_eq!(parabolic_margin(&BlockKind::Par3(z), 0.5).unwrap(), 1.0);
        // sup over the line nu = 1/(2r) of 1/|1 + nu + i xi| is 1/(1 + nu).
        let e = OperatorKernel::exponential(1.0, eye(1)).unwrap();
        let r = 0.125;
        let s = 1.0 / (1.0 + 4.0);
        assert!((parabolic_margin(&BlockKind::Par2(e.clone()), r).unwrap() - (1.0 - s)).abs() < 1e-14);
        assert!((parabolic_margin(&BlockKind::Par3(e.clone()), r).unwrap() - (1.0 - s / (1.0 - s))).abs() < 1e-14);
        assert!(parabolic_margin(&BlockKind::Par3(e.scaled(10.0)), r).is_err());
        assert!(parabolic_margin(&BlockKind::Const(eye(1)), r).is_err());
        // Shrinking r drives both margins to 1.
        assert!(parabolic_margin(&BlockKind::Par3(e), 1e-6).unwrap() > 1.0 - 1e-5);
    }

    #[test]
    fn resolvent_margin_dominates_its_bound() {
        let b = OperatorKernel::exponential(1.0, eye(2)).unwrap();
        let law = MaterialLaw::single(2, BlockKind::Hyp1(b.clone())).unwrap();
        // nu_min = 1: |B|_{L1,1} = 1/2 < 1.
        let rep = solvability_margin(&law, 0.5, &MarginGrid::standard(0.5)).unwrap();
        // Exact symbol: (i xi + nu)(1 + i xi + nu)/(i xi + nu) = 1 + nu + i xi.
        assert!((rep.c_est - 2.0).abs() < 1e-12);
        let bound = hyp_b_bound(&b, 0.0, 1.0, 1.0).unwrap();
        assert!(rep.c_est >= bound);
        assert_eq!(rep.analytic_bound, Some(bound));
        assert_eq!(rep.label(), "certified");
    }

    #[test]
    fn coupled_blocks_are_scanned_together() {
        // [[z^{-1}... ]] with an off-diagonal z N coupling: Herm((i xi + nu) M) = [[nu, 1/2], [1/2, nu]] at xi = 0.
        let law = MaterialLaw::new(vec![("a".into(), 1), ("b".into(), 1)])
            .with_entry("a", "a", BlockKind::Const(eye(1)))
            .unwrap()
            .with_entry("b", "b", BlockKind::Const(eye(1)))
            .unwrap()
            .with_entry("a", "b", BlockKind::ZConst(eye(1)))
            .unwrap();
        let rep = solvability_margin(&law, 1.0, &MarginGrid { xis: vec![0.0], nus: vec![0.5] }).unwrap();
        assert!((rep.c_est - 0.0).abs() < 1e-14);
        assert_eq!(rep.analytic_bound, None);
        assert_eq!(rep.label(), "failed");
    }
}
