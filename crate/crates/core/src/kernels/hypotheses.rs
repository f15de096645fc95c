//! Executable versions of the kernel hypotheses: (i) selfadjoint values,
//! (ii) pairwise commuting values, (iii) `xi Im B̂(xi - i nu0) <= d`, and the
//! propagation of (iii) to larger weights with constant `4d`.

use std::fmt;

use rayon::prelude::*;

use super::OperatorKernel;
use crate::error::{Error, Result};
use crate::linalg::{imaginary_part, lambda_max, op_norm_real};
use crate::tolerances::STRUCTURAL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub pass: bool,
    /// Worst value found (asymmetry or commutator norm).
    pub value: f64,
    pub threshold: f64,
}

/// Sample times covering the kernel's breakpoints and its effective support.
pub fn default_sample_times(b: &OperatorKernel) -> Vec<f64> {
    let end = b.support_end().unwrap_or_else(|| b.cutoff(b.mu()).unwrap_or(10.0).min(50.0));
    let mut t: Vec<f64> = (0..=200).map(|k| end * k as f64 / 200.0).collect();
    for p in b.breakpoints() {
        t.extend([p, p - 1e-9, p + 1e-9]);
    }
    t.retain(|&x| x >= 0.0);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// All pairs from a coarse subset of [`default_sample_times`].
pub fn default_time_pairs(b: &OperatorKernel) -> Vec<(f64, f64)> {
    let t = default_sample_times(b);
    let stride = (t.len() / 40).max(1);
    let coarse: Vec<f64> = t.iter().copied().step_by(stride).chain(b.breakpoints()).collect();
    let mut pairs = Vec::new();
    for (i, &a) in coarse.iter().enumerate() {
        for &s in &coarse[i + 1..] {
            pairs.push((a, s));
        }
    }
    pairs
}

/// Hypothesis (i): `max_t ‖B(t) - B(t)*‖ <= 1e-12 max_t ‖B(t)‖`.
pub fn check_selfadjoint(b: &OperatorKernel, times: &[f64]) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &t in times {
        let m = b.eval(t);
        worst = worst.max(op_norm_real(&(&m - m.transpose())));
        scale = scale.max(op_norm_real(&m));
    }
    let threshold = STRUCTURAL * scale;
    CheckOutcome { pass: worst <= threshold, value: worst, threshold }
}

/// Hypothesis (ii): `max ‖B(t)B(s) - B(s)B(t)‖ <= 1e-12 max ‖B(t)‖²`.
pub fn check_commuting(b: &OperatorKernel, pairs: &[(f64, f64)]) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &(t, s) in pairs {
        let bt = b.eval(t);
        let bs = b.eval(s);
        worst = worst.max(op_norm_real(&(&bt * &bs - &bs * &bt)));
        scale = scale.max(op_norm_real(&bt)).max(op_norm_real(&bs));
    }
    let threshold = STRUCTURAL * scale * scale;
    CheckOutcome { pass: worst <= threshold, value: worst, threshold }
}

/// `{lo·10^{k/ppd}}` up to `hi`, positive frequencies only.
pub fn positive_frequency_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * points_per_decade as f64).ceil() as usize;
    (0..=n).map(|k| lo * 10f64.powf(k as f64 / points_per_decade as f64)).collect()
}

/// `{nu0, 2 nu0 + 1, 5 nu0 + 2}`.
pub fn nu_ladder(nu0: f64) -> Vec<f64> {
    vec![nu0, 2.0 * nu0 + 1.0, 5.0 * nu0 + 2.0]
}

fn im_sup(b: &OperatorKernel, nu: f64, xis: &[f64]) -> Result<(f64, f64)> {
    let vals: Vec<(f64, f64)> = xis
        .par_iter()
        .filter(|&&xi| xi > 0.0)
        .map(|&xi| -> Result<(f64, f64)> {
            let im = imaginary_part(&b.transform(xi, nu)?);
            Ok((xi * lambda_max(&im), xi))
        })
        .collect::<Result<_>>()?;
    Ok(vals
        .into_iter()
        .fold((f64::NEG_INFINITY, f64::NAN), |acc, v| if v.0 > acc.0 { v } else { acc }))
}

/// Grid estimate of the smallest `d` in `xi Im B̂(xi - i nu0) <= d`, scanning `xi > 0`.
///
/// Returns the raw supremum, which is negative for kernels with strictly dissipative
/// transforms, and `0` for the zero kernel.
pub fn estimate_im_bound(b: &OperatorKernel, nu0: f64, xis: &[f64]) -> Result<f64> {
    if nu0 < b.mu() {
        return Err(Error::DivergenceRisk { nu: nu0, mu: b.mu() });
    }
    if b.is_zero() {
        return Ok(0.0);
    }
    Ok(im_sup(b, nu0, xis)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    pub pass: bool,
    pub d: f64,
    /// Largest `xi λ_max(Im B̂(xi - i nu))` found.
    pub worst_value: f64,
    pub worst_nu: f64,
    pub worst_xi: f64,
    /// `4d - worst_value`.
    pub margin: f64,
}

/// Checks `xi λ_max(Im B̂(xi - i nu)) <= 4d` for every `nu` in `nus` and every grid `xi`.
pub fn verify_4d_propagation(
    b: &OperatorKernel,
    nu0: f64,
    d: f64,
    nus: &[f64],
    xis: &[f64],
) -> Result<PropagationReport> {
    if let Some(&bad) = nus.iter().find(|&&nu| nu < nu0) {
        return Err(Error::Precondition(format!("nu = {bad} lies below nu0 = {nu0}")));
    }
    if nu0 < b.mu() {
        return Err(Error::DivergenceRisk { nu: nu0, mu: b.mu() });
    }
    let mut worst = (f64::NEG_INFINITY, f64::NAN, f64::NAN);
    if !b.is_zero() {
        for &nu in nus {
            let (v, xi) = im_sup(b, nu, xis)?;
            if v > worst.0 {
                worst = (v, nu, xi);
            }
        }
    } else {
        worst = (0.0, nus.first().copied().unwrap_or(nu0), 0.0);
    }
    let tol = STRUCTURAL * (1.0 + b.l1_weighted_norm(nu0)?) * xis.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let bound = 4.0 * d;
    Ok(PropagationReport {
        pass: worst.0 <= bound + tol,
        d,
        worst_value: worst.0,
        worst_nu: worst.1,
        worst_xi: worst.2,
        margin: bound - worst.0,
    })
}

#[derive(Debug, Clone)]
pub struct HypothesisOptions {
    pub nu0: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Refinement knob of the frequency scan.
    pub points_per_decade: usize,
}

impl HypothesisOptions {
    pub fn new(nu0: f64) -> Self {
        Self { nu0, xi_min: 1e-3, xi_max: 1e4, points_per_decade: 60 }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        positive_frequency_grid(self.xi_min, self.xi_max, self.points_per_decade)
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub nu0: f64,
    pub l1_norm: f64,
    pub selfadjoint: CheckOutcome,
    pub commuting: CheckOutcome,
    pub d_est: f64,
    /// `max(d_est, 0)`, the constant used for propagation.
    pub d: f64,
    pub propagation: PropagationReport,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.selfadjoint.pass && self.commuting.pass && self.propagation.pass
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |p: bool| if p { "pass" } else { "FAIL" };
        writeln!(f, "{:<28} {:>14} {:>14}  result", "check", "value", "threshold")?;
        writeln!(
            f,
            "{:<28} {:>14.6e} {:>14.6e}  {}",
            "(i) selfadjoint",
            self.selfadjoint.value,
            self.selfadjoint.threshold,
            flag(self.selfadjoint.pass)
        )?;
        writeln!(
            f,
            "{:<28} {:>14.6e} {:>14.6e}  {}",
            "(ii) commuting",
            self.commuting.value,
            self.commuting.threshold,
            flag(self.commuting.pass)
        )?;
        writeln!(f, "{:<28} {:>14.6e} {:>14}  at nu0 = {}", "(iii) d_est", self.d_est, "", self.nu0)?;
        writeln!(
            f,
            "{:<28} {:>14.6e} {:>14.6e}  {} (nu = {}, xi = {:.4e})",
            "(iii) 4d propagation",
            self.propagation.worst_value,
            4.0 * self.d,
            flag(self.propagation.pass),
            self.propagation.worst_nu,
            self.propagation.worst_xi
        )?;
        writeln!(f, "{:<28} {:>14.6e}", "|B|_L1 at nu0", self.l1_norm)?;
        write!(f, "overall: {}", flag(self.pass()))
    }
}

/// Runs (i), (ii), the `d` estimate at `nu0`, and 4d propagation on [`nu_ladder`].
pub fn check_hypotheses(b: &OperatorKernel, opts: &HypothesisOptions) -> Result<HypothesisReport> {
    let times = default_sample_times(b);
    let selfadjoint = check_selfadjoint(b, &times);
    let commuting = check_commuting(b, &default_time_pairs(b));
    let xis = opts.frequencies();
    let d_est = estimate_im_bound(b, opts.nu0, &xis)?;
    let d = d_est.max(0.0);
    let propagation = verify_4d_propagation(b, opts.nu0, d, &nu_ladder(opts.nu0), &xis)?;
    Ok(HypothesisReport {
        nu0: opts.nu0,
        l1_norm: b.l1_weighted_norm(opts.nu0)?,
        selfadjoint,
        commuting,
        d_est,
        d,
        propagation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ExpWindow, Term};
    use crate::linalg::RMatrix;
    use std::sync::Arc;

    fn mat(rows: &[&[f64]]) -> RMatrix {
        RMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn selfadjoint_examples() {
        let e = OperatorKernel::exponential(1.0, RMatrix::identity(2, 2)).unwrap();
        let r = check_selfadjoint(&e, &default_sample_times(&e));
        assert!(r.pass && r.value == 0.0);
        let n = OperatorKernel::exponential(1.0, mat(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap();
        assert!(!check_selfadjoint(&n, &default_sample_times(&n)).pass);
        let s = OperatorKernel::exponential(1.0, mat(&[&[2.0, 1.0], &[1.0, 3.0]])).unwrap();
        assert!(check_selfadjoint(&s, &default_sample_times(&s)).pass);
    }

    #[test]
    fn commuting_examples() {
        let s = OperatorKernel::exponential(1.0, mat(&[&[2.0, 1.0], &[1.0, 3.0]])).unwrap();
        assert!(check_commuting(&s, &default_time_pairs(&s)).pass);
        let z = OperatorKernel::zero(2);
        assert!(check_commuting(&z, &default_time_pairs(&z)).pass);
        let a1 = mat(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let a2 = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let comm = &a1 * &a2 - &a2 * &a1;
        assert!(op_norm_real(&comm) > 0.5);
        let k = OperatorKernel::separable(
            2,
            vec![
                Term { profile: Arc::new(ExpWindow { rate: 1.0, start: 0.0, end: 1.0 }), matrix: a1 },
                Term { profile: Arc::new(ExpWindow { rate: 1.0, start: 1.0, end: f64::INFINITY }), matrix: a2 },
            ],
        )
        .unwrap();
        let r = check_commuting(&k, &default_time_pairs(&k));
        assert!(!r.pass);
        // e^{-t} e^{-s} ‖[A1, A2]‖ at t -> 0, s = 1.
        assert!((r.value - (-1.0f64).exp() * op_norm_real(&comm)).abs() < 1e-6);
    }

    #[test]
    fn im_bound_examples() {
        let xis = positive_frequency_grid(1e-3, 1e4, 40);
        assert_eq!(estimate_im_bound(&OperatorKernel::zero(2), 0.0, &xis).unwrap(), 0.0);
        let e = OperatorKernel::exponential(1.0, RMatrix::identity(1, 1)).unwrap();
        assert!(estimate_im_bound(&e, 0.0, &xis).unwrap() <= 0.0);
        // sin(4t) e^{-t}: xi Im B̂ = -8 xi² / (sqrt(2 pi) |17 - xi² + 2 i xi|²) <= 0.
        let sine = OperatorKernel::damped_sine(1.0, 4.0, RMatrix::identity(1, 1)).unwrap();
        assert!(estimate_im_bound(&sine, 0.0, &xis).unwrap() <= 0.0);
        // cos(4t) e^{-t} has a positive Im part on a band of frequencies.
        let cosine = OperatorKernel::damped_cosine(1.0, 4.0, RMatrix::identity(1, 1)).unwrap();
        let d = estimate_im_bound(&cosine, 0.0, &xis).unwrap();
        assert!((d - 0.224405).abs() < 5e-4, "d = {d}");
        let r = verify_4d_propagation(&cosine, 0.0, d, &nu_ladder(0.0), &xis).unwrap();
        assert!(r.pass && r.margin > 0.0);
    }

    #[test]
    fn exponential_im_part_matches_closed_form() {
        let e = OperatorKernel::exponential(1.0, RMatrix::identity(1, 1)).unwrap();
        let s2pi = (2.0 * std::f64::consts::PI).sqrt();
        for &nu in &[0.5, 1.0, 2.0, 5.0] {
            for &xi in &[0.1, 1.0, 10.0] {
                let im = imaginary_part(&e.transform(xi, nu).unwrap());
                let expect = -xi * xi / (s2pi * ((1.0 + nu) * (1.0 + nu) + xi * xi));
                assert!((xi * im[(0, 0)].re - expect).abs() < 1e-15);
            }
        }
        let r = verify_4d_propagation(&e, 0.0, 0.0, &[0.5, 1.0, 2.0, 5.0], &positive_frequency_grid(1e-3, 1e3, 20)).unwrap();
        assert!(r.pass && r.margin >= 0.0);
    }

    #[test]
    fn propagation_rejects_small_nu() {
        let e = OperatorKernel::exponential(1.0, RMatrix::identity(1, 1)).unwrap();
        assert!(verify_4d_propagation(&e, 1.0, 0.0, &[0.5], &[1.0]).is_err());
    }

    #[test]
    fn combined_report_for_spd_exponential() {
        let e = OperatorKernel::exponential(2.0, mat(&[&[2.0, 1.0], &[1.0, 3.0]])).unwrap();
        let r = check_hypotheses(&e, &HypothesisOptions::new(1.0)).unwrap();
        assert!(r.pass(), "{r}");
        assert!(r.d_est <= 1e-12);
        let text = r.to_string();
        assert!(text.contains("overall: pass"));
    }
}
