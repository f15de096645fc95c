//! Matrix-valued memory kernels `B: [0, ∞) → ℝ^{m×m}`: weighted L1 norms, the
//! half-plane transform `B̂(xi - i nu)`, causal convolution, and the hypothesis checks.

mod hypotheses;
pub mod profile;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{op_norm_real, to_complex, CMatrix, RMatrix};
use crate::quadrature::{integrate_complex, integrate_real};
use crate::weighted_space::WeightedSignal;

pub use hypotheses::{
    check_commuting, check_hypotheses, check_selfadjoint, default_sample_times, default_time_pairs,
    estimate_im_bound, nu_ladder, positive_frequency_grid, verify_4d_propagation, CheckOutcome,
    HypothesisOptions, HypothesisReport, PropagationReport,
};
pub use profile::{DampedCosine, DampedSine, ExpWindow, FnProfile, ProfileParams, ProfileRegistry, ScalarProfile};

/// One separable term `g(t)·M`.
#[derive(Clone)]
pub struct Term {
    pub profile: Arc<dyn ScalarProfile>,
    pub matrix: RMatrix,
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * {:?}", self.profile.name(), self.matrix.shape())
    }
}

#[derive(Debug, Clone)]
pub enum KernelForm {
    /// `Σ_i g_i(t) M_i`.
    Separable(Vec<Term>),
    /// Piecewise constant: `values[k]` on `[k dt, (k+1) dt)`, zero after the last cell.
    Sampled { dt: f64, values: Vec<RMatrix> },
}

#[derive(Debug, Clone)]
pub struct OperatorKernel {
    dim: usize,
    mu: f64,
    form: KernelForm,
}

// Relative size of the neglected tail when integrating to a finite cutoff.
const TAIL: f64 = 1e-16;

impl OperatorKernel {
    pub fn zero(dim: usize) -> Self {
        Self { dim, mu: 0.0, form: KernelForm::Separable(Vec::new()) }
    }

    pub fn separable(dim: usize, terms: Vec<Term>) -> Result<Self> {
        let mut mu: f64 = 0.0;
        for t in &terms {
            if t.matrix.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!(
                    "kernel term matrix {:?} in a {dim}x{dim} kernel",
                    t.matrix.shape()
                )));
            }
            if t.profile.support_end().is_none() {
                mu = mu.max(-t.profile.envelope().0);
            }
        }
        Ok(Self { dim, mu, form: KernelForm::Separable(terms) })
    }

    pub fn from_profile<P: ScalarProfile + 'static>(profile: P, m0: RMatrix) -> Result<Self> {
        let dim = m0.nrows();
        Self::separable(dim, vec![Term { profile: Arc::new(profile), matrix: m0 }])
    }

    /// `e^{-a t} M0`.
    pub fn exponential(a: f64, m0: RMatrix) -> Result<Self> {
        Self::from_profile(ExpWindow::exponential(a), m0)
    }

    /// `χ_[0,T)(t) M0`.
    pub fn boxcar(length: f64, m0: RMatrix) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Precondition("boxcar length must be positive".into()));
        }
        Self::from_profile(ExpWindow::boxcar(length), m0)
    }

    /// `e^{-a t} cos(omega t) M0`.
    pub fn damped_cosine(a: f64, omega: f64, m0: RMatrix) -> Result<Self> {
        Self::from_profile(DampedCosine { rate: a, omega }, m0)
    }

    /// `e^{-a t} sin(omega t) M0`.
    pub fn damped_sine(a: f64, omega: f64, m0: RMatrix) -> Result<Self> {
        Self::from_profile(DampedSine { rate: a, omega }, m0)
    }

    pub fn sampled(dt: f64, values: Vec<RMatrix>) -> Result<Self> {
        if !(dt > 0.0) || values.is_empty() {
            return Err(Error::Precondition("sampled kernel needs dt > 0 and at least one sample".into()));
        }
        let dim = values[0].nrows();
        if values.iter().any(|v| v.shape() != (dim, dim)) {
            return Err(Error::DimensionMismatch("sampled kernel matrices differ in shape".into()));
        }
        Ok(Self { dim, mu: 0.0, form: KernelForm::Sampled { dt, values } })
    }

    /// Overrides the declared decay parameter.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if mu < self.mu || !(mu >= 0.0) {
            return Err(Error::Precondition(format!(
                "mu = {mu} is below the decay the kernel needs ({})",
                self.mu
            )));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn is_zero(&self) -> bool {
        match &self.form {
            KernelForm::Separable(terms) => terms.iter().all(|t| t.matrix.amax() == 0.0),
            KernelForm::Sampled { values, .. } => values.iter().all(|v| v.amax() == 0.0),
        }
    }

    /// The single term `(g, M)` when the kernel has exactly one separable term.
    pub fn single_term(&self) -> Option<&Term> {
        match &self.form {
            KernelForm::Separable(terms) if terms.len() == 1 => Some(&terms[0]),
            _ => None,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_matrices(|m| m * s)
    }

    /// `S B(t) S` for a symmetric `S`.
    pub fn conjugated(&self, s: &RMatrix) -> Result<Self> {
        if s.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch("conjugating matrix has the wrong shape".into()));
        }
        Ok(self.map_matrices(|m| s * m * s))
    }

    fn map_matrices<F: Fn(&RMatrix) -> RMatrix>(&self, f: F) -> Self {
        let form = match &self.form {
            KernelForm::Separable(terms) => KernelForm::Separable(
                terms
                    .iter()
                    .map(|t| Term { profile: t.profile.clone(), matrix: f(&t.matrix) })
                    .collect(),
            ),
            KernelForm::Sampled { dt, values } => {
                KernelForm::Sampled { dt: *dt, values: values.iter().map(&f).collect() }
            }
        };
        Self { dim: self.dim, mu: self.mu, form }
    }

    pub fn eval(&self, t: f64) -> RMatrix {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        if t < 0.0 {
            return out;
        }
        match &self.form {
            KernelForm::Separable(terms) => {
                for term in terms {
                    let g = term.profile.eval(t);
                    if g != 0.0 {
                        out += &term.matrix * g;
                    }
                }
            }
            KernelForm::Sampled { dt, values } => {
                let k = (t / dt).floor() as usize;
                if k < values.len() {
                    out.copy_from(&values[k]);
                }
            }
        }
        out
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.form {
            KernelForm::Separable(terms) => {
                let mut b: Vec<f64> = terms.iter().flat_map(|t| t.profile.breakpoints()).collect();
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            }
            KernelForm::Sampled { dt, values } => (0..=values.len()).map(|k| k as f64 * dt).collect(),
        }
    }

    /// Time after which the kernel vanishes, if finite.
    pub fn support_end(&self) -> Option<f64> {
        match &self.form {
            KernelForm::Separable(terms) => terms
                .iter()
                .map(|t| t.profile.support_end())
                .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e))),
            KernelForm::Sampled { dt, values } => Some(dt * values.len() as f64),
        }
    }

    fn oscillation(&self) -> f64 {
        match &self.form {
            KernelForm::Separable(terms) => terms.iter().fold(0.0, |m, t| m.max(t.profile.oscillation())),
            KernelForm::Sampled { .. } => 0.0,
        }
    }

    pub(crate) fn check_nu(&self, nu: f64) -> Result<()> {
        if nu < self.mu || !nu.is_finite() {
            return Err(Error::DivergenceRisk { nu, mu: self.mu });
        }
        Ok(())
    }

    /// Finite cutoff `T` with `∫_T^∞ e^{-nu t} ‖B(t)‖ dt` negligible.
    fn cutoff(&self, nu: f64) -> Result<f64> {
        if let Some(end) = self.support_end() {
            return Ok(end);
        }
        let KernelForm::Separable(terms) = &self.form else { unreachable!() };
        let mut t_cut: f64 = 1.0;
        for term in terms {
            if term.profile.support_end().is_some() {
                t_cut = t_cut.max(term.profile.support_end().unwrap());
                continue;
            }
            let (rate, c) = term.profile.envelope();
            let decay = rate + nu;
            if decay <= 0.0 {
                return Err(Error::DivergenceRisk { nu, mu: -rate });
            }
            let c = c * op_norm_real(&term.matrix);
            if c > 0.0 {
                t_cut = t_cut.max((c / (TAIL * decay)).ln().max(0.0) / decay);
            }
        }
        Ok(t_cut)
    }

    /// `∫_a^b B(t) dt` for `0 <= a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> RMatrix {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let a = a.max(0.0);
        if !(b > a) {
            return out;
        }
        match &self.form {
            KernelForm::Separable(terms) => {
                for term in terms {
                    out += &term.matrix * profile_integral(term.profile.as_ref(), a, b);
                }
            }
            KernelForm::Sampled { dt, values } => {
                for (k, v) in values.iter().enumerate() {
                    let lo = (k as f64 * dt).max(a);
                    let hi = ((k + 1) as f64 * dt).min(b);
                    if hi > lo {
                        out += v * (hi - lo);
                    }
                }
            }
        }
        out
    }

    /// `∫_0^∞ e^{-nu t} ‖B(t)‖ dt` with the spectral norm.
    pub fn l1_weighted_norm(&self, nu: f64) -> Result<f64> {
        self.check_nu(nu)?;
        match &self.form {
            KernelForm::Sampled { dt, values } => {
                let cell = if nu == 0.0 { *dt } else { -(-nu * dt).exp_m1() / nu };
                Ok(values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| op_norm_real(v) * (-nu * k as f64 * dt).exp() * cell)
                    .sum())
            }
            KernelForm::Separable(terms) if terms.is_empty() => Ok(0.0),
            KernelForm::Separable(terms) if terms.len() == 1 => {
                let t = &terms[0];
                let norm = op_norm_real(&t.matrix);
                if norm == 0.0 {
                    return Ok(0.0);
                }
                let g = match t.profile.weighted_l1(nu) {
                    Some(v) => v,
                    None => {
                        let end = self.cutoff(nu)?;
                        let p = t.profile.clone();
                        integrate_real(
                            move |s| (-nu * s).exp() * p.eval(s).abs(),
                            0.0,
                            end,
                            &t.profile.breakpoints(),
                            self.panel_width(0.0),
                        )
                    }
                };
                Ok(norm * g)
            }
            KernelForm::Separable(_) => {
                let end = self.cutoff(nu)?;
                Ok(integrate_real(
                    |s| (-nu * s).exp() * op_norm_real(&self.eval(s)),
                    0.0,
                    end,
                    &self.breakpoints(),
                    self.panel_width(0.0),
                ))
            }
        }
    }

    fn panel_width(&self, xi: f64) -> f64 {
        let w = self.oscillation() + xi.abs();
        (0.25f64).min(1.0 / (1.0 + w))
    }

    /// `∫_0^∞ e^{-s t} B(t) dt` for `Re s >= mu`.
    pub fn laplace(&self, s: Complex64) -> Result<CMatrix> {
        self.check_nu(s.re)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        match &self.form {
            KernelForm::Sampled { dt, values } => {
                let cell = ExpWindow::boxcar(*dt).laplace(s).expect("finite support");
                for (k, v) in values.iter().enumerate() {
                    let f = (-s * (k as f64 * dt)).exp() * cell;
                    out += to_complex(v) * f;
                }
            }
            KernelForm::Separable(terms) => {
                for term in terms {
                    let g = match term.profile.laplace(s) {
                        Some(g) => g,
                        None => {
                            let p = term.profile.clone();
                            let end = self.cutoff(s.re)?;
                            integrate_complex(
                                move |t| (-s * t).exp() * p.eval(t),
                                0.0,
                                end,
                                &term.profile.breakpoints(),
                                self.panel_width(s.im),
                            )
                        }
                    };
                    out += to_complex(&term.matrix) * g;
                }
            }
        }
        Ok(out)
    }

    /// `B̂(xi - i nu) = (2 pi)^{-1/2} ∫_0^∞ e^{-i xi t} e^{-nu t} B(t) dt`.
    pub fn transform(&self, xi: f64, nu: f64) -> Result<CMatrix> {
        Ok(self.laplace(Complex64::new(nu, xi))?.unscale((2.0 * PI).sqrt()))
    }

    /// True when every term has a closed-form transform.
    pub fn has_closed_form_transform(&self) -> bool {
        match &self.form {
            KernelForm::Sampled { .. } => true,
            KernelForm::Separable(terms) => {
                let probe = Complex64::new(self.mu + 1.0, 0.0);
                terms.iter().all(|t| t.profile.laplace(probe).is_some())
            }
        }
    }

    /// Convolution weights `W_l = ∫_{(l-1)dt}^{l dt} B(s) ds` for lags `l = 1..n`.
    pub fn lag_weights(&self, dt: f64, n: usize) -> LagWeights {
        match &self.form {
            KernelForm::Separable(terms) => LagWeights::Separable(
                terms
                    .iter()
                    .filter(|t| t.matrix.amax() != 0.0)
                    .map(|t| {
                        let end = t.profile.support_end().unwrap_or(f64::INFINITY);
                        let mut w = vec![0.0; n];
                        for (l, wl) in w.iter_mut().enumerate().skip(1) {
                            let lo = (l - 1) as f64 * dt;
                            if lo >= end {
                                break;
                            }
                            *wl = profile_integral(t.profile.as_ref(), lo, l as f64 * dt);
                        }
                        (w, t.matrix.clone())
                    })
                    .collect(),
            ),
            KernelForm::Sampled { .. } => {
                let end = self.support_end().unwrap_or(f64::INFINITY);
                let mut w = vec![DMatrix::zeros(self.dim, self.dim); n];
                for (l, wl) in w.iter_mut().enumerate().skip(1) {
                    let lo = (l - 1) as f64 * dt;
                    if lo >= end {
                        break;
                    }
                    *wl = self.integral(lo, l as f64 * dt);
                }
                LagWeights::Dense(w)
            }
        }
    }
}

fn profile_integral(p: &dyn ScalarProfile, a: f64, b: f64) -> f64 {
    if let Some(v) = p.integral(a, b) {
        return v;
    }
    let width = (0.25f64).min(1.0 / (1.0 + p.oscillation()));
    let b = p.support_end().map_or(b, |e| b.min(e));
    integrate_real(|t| p.eval(t), a, b, &p.breakpoints(), width)
}

/// Lag weights of a causal convolution on a uniform grid; lag 0 is always zero.
#[derive(Debug, Clone)]
pub enum LagWeights {
    Separable(Vec<(Vec<f64>, RMatrix)>),
    Dense(Vec<RMatrix>),
}

impl LagWeights {
    pub fn is_zero(&self) -> bool {
        match self {
            LagWeights::Separable(t) => t.is_empty(),
            LagWeights::Dense(w) => w.iter().all(|m| m.amax() == 0.0),
        }
    }

    /// `Σ_{l=1}^{j} W_l x_{j-l}` where `x` holds at least `j` states of width `dim`, row-major.
    pub fn history(&self, j: usize, x: &[f64], dim: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            LagWeights::Separable(terms) => {
                let mut acc = vec![0.0; dim];
                for (w, m) in terms {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    let lmax = j.min(w.len() - 1);
                    for l in 1..=lmax {
                        let wl = w[l];
                        if wl == 0.0 {
                            continue;
                        }
                        let row = &x[(j - l) * dim..(j - l + 1) * dim];
                        for (a, v) in acc.iter_mut().zip(row) {
                            *a += wl * v;
                        }
                    }
                    for r in 0..dim {
                        let mut s = 0.0;
                        for c in 0..dim {
                            s += m[(r, c)] * acc[c];
                        }
                        out[r] += s;
                    }
                }
            }
            LagWeights::Dense(w) => {
                let lmax = j.min(w.len() - 1);
                for (l, wl) in w.iter().enumerate().take(lmax + 1).skip(1) {
                    let row = &x[(j - l) * dim..(j - l + 1) * dim];
                    for r in 0..dim {
                        let mut s = 0.0;
                        for c in 0..dim {
                            s += wl[(r, c)] * row[c];
                        }
                        out[r] += s;
                    }
                }
            }
        }
    }

    /// Applies the convolution to every sample of `x` (`n` states of width `dim`).
    pub fn apply(&self, x: &[f64], dim: usize) -> Vec<f64> {
        let n = x.len() / dim;
        let mut out = vec![0.0; x.len()];
        for j in 0..n {
            self.history(j, x, dim, &mut out[j * dim..(j + 1) * dim]);
        }
        out
    }
}

pub fn l1_weighted_norm(b: &OperatorKernel, nu: f64) -> Result<f64> {
    b.l1_weighted_norm(nu)
}

pub fn kernel_transform(b: &OperatorKernel, xi: f64, nu: f64) -> Result<CMatrix> {
    b.transform(xi, nu)
}

/// `B̂` bound to a kernel, evaluated on the line `xi - i nu`.
#[derive(Debug, Clone)]
pub struct KernelTransform {
    pub kernel: OperatorKernel,
    pub closed_form: bool,
}

impl KernelTransform {
    pub fn new(kernel: &OperatorKernel) -> Self {
        Self { closed_form: kernel.has_closed_form_transform(), kernel: kernel.clone() }
    }

    pub fn eval(&self, xi: f64, nu: f64) -> Result<CMatrix> {
        self.kernel.transform(xi, nu)
    }
}

/// Causal convolution `t ↦ ∫ B(t - s) u(s) ds` on `u`'s grid, with `u` read as
/// piecewise constant on the cells `[t_j, t_j + dt)`.
pub fn convolve(b: &OperatorKernel, u: &WeightedSignal) -> Result<WeightedSignal> {
    b.check_nu(u.nu())?;
    if b.dim() != u.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel dimension {} vs signal dimension {}",
            b.dim(),
            u.dim()
        )));
    }
    let w = b.lag_weights(u.grid().dt, u.len());
    let data = w.apply(u.data(), u.dim());
    WeightedSignal::new(*u.grid(), u.nu(), u.dim(), data)
}
