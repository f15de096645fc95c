//! Scalar time profiles `g: [0, ∞) → ℝ` used to build separable kernels `g(t)·M`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A scalar function on `t >= 0`, with optional closed forms.
///
/// Only `eval` and `envelope` are required. The closed forms speed up transforms and
/// norms; without them the kernel falls back to quadrature.
pub trait ScalarProfile: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn eval(&self, t: f64) -> f64;

    /// `(rate, c)` with `|g(t)| <= c e^{-rate t}` for all `t >= 0`.
    fn envelope(&self) -> (f64, f64);

    /// Points where `g` jumps or has a kink.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `g` vanishes for `t >= support_end`.
    fn support_end(&self) -> Option<f64> {
        None
    }

    /// Angular frequency of oscillations, used to size quadrature panels.
    fn oscillation(&self) -> f64 {
        0.0
    }

    /// `∫_0^∞ e^{-s t} g(t) dt`.
    fn laplace(&self, _s: Complex64) -> Option<Complex64> {
        None
    }

    /// `∫_0^∞ e^{-nu t} |g(t)| dt`.
    fn weighted_l1(&self, _nu: f64) -> Option<f64> {
        None
    }

    /// `∫_a^b g(t) dt` for `0 <= a <= b`.
    fn integral(&self, _a: f64, _b: f64) -> Option<f64> {
        None
    }
}

/// `e^{-rate t}` on `[start, end)`, zero elsewhere. `end` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpWindow {
    pub rate: f64,
    pub start: f64,
    pub end: f64,
}

impl ExpWindow {
    pub fn exponential(rate: f64) -> Self {
        Self { rate, start: 0.0, end: f64::INFINITY }
    }

    pub fn boxcar(length: f64) -> Self {
        Self { rate: 0.0, start: 0.0, end: length }
    }

    // ∫_lo^hi e^{-p t} dt
    fn exp_integral(p: Complex64, lo: f64, hi: f64) -> Complex64 {
        if hi.is_infinite() {
            return (-p * lo).exp() / p;
        }
        let w = hi - lo;
        if (p * w).norm() < 1e-8 {
            return (-p * lo).exp() * w * (1.0 - p * w * 0.5);
        }
        // e^{-p lo} (1 - e^{-p w}) / p, with expm1 accuracy for small p w.
        let x = -p * w;
        let expm1 = if x.norm() < 1e-3 {
            x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)))
        } else {
            x.exp() - 1.0
        };
        -(-p * lo).exp() * expm1 / p
    }
}

impl ScalarProfile for ExpWindow {
    fn name(&self) -> String {
        if self.start == 0.0 && self.end.is_infinite() {
            format!("exp(-{} t)", self.rate)
        } else if self.rate == 0.0 {
            format!("box[{}, {})", self.start, self.end)
        } else {
            format!("exp(-{} t) on [{}, {})", self.rate, self.start, self.end)
        }
    }

    fn eval(&self, t: f64) -> f64 {
        if t >= self.start && t < self.end {
            (-self.rate * t).exp()
        } else {
            0.0
        }
    }

    fn envelope(&self) -> (f64, f64) {
        (self.rate, (-self.rate * self.start).exp().max(1.0))
    }

    fn breakpoints(&self) -> Vec<f64> {
        [self.start, self.end].into_iter().filter(|x| x.is_finite()).collect()
    }

    fn support_end(&self) -> Option<f64> {
        self.end.is_finite().then_some(self.end)
    }

    fn laplace(&self, s: Complex64) -> Option<Complex64> {
        let p = s + self.rate;
        if self.end.is_infinite() && p.re <= 0.0 {
            return None;
        }
        Some(Self::exp_integral(p, self.start, self.end))
    }

    fn weighted_l1(&self, nu: f64) -> Option<f64> {
        self.laplace(Complex64::new(nu, 0.0)).map(|z| z.re)
    }

    fn integral(&self, a: f64, b: f64) -> Option<f64> {
        let lo = a.max(self.start);
        let hi = b.min(self.end);
        if !(hi > lo) {
            return Some(0.0);
        }
        Some(Self::exp_integral(Complex64::new(self.rate, 0.0), lo, hi).re)
    }
}

/// `e^{-rate t} sin(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedSine {
    pub rate: f64,
    pub omega: f64,
}

impl ScalarProfile for DampedSine {
    fn name(&self) -> String {
        format!("exp(-{} t) sin({} t)", self.rate, self.omega)
    }

    fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        (-self.rate * t).exp() * (self.omega * t).sin()
    }

    fn envelope(&self) -> (f64, f64) {
        (self.rate, 1.0)
    }

    fn oscillation(&self) -> f64 {
        self.omega.abs()
    }

    fn laplace(&self, s: Complex64) -> Option<Complex64> {
        let p = s + self.rate;
        if p.re <= 0.0 {
            return None;
        }
        Some(self.omega / (p * p + self.omega * self.omega))
    }

    fn weighted_l1(&self, nu: f64) -> Option<f64> {
        let b = self.rate + nu;
        let w = self.omega.abs();
        if b <= 0.0 {
            return None;
        }
        if w == 0.0 {
            return Some(0.0);
        }
        let coth = 1.0 / (b * std::f64::consts::PI / (2.0 * w)).tanh();
        Some(w * coth / (w * w + b * b))
    }

    fn integral(&self, a: f64, b: f64) -> Option<f64> {
        let (r, w) = (self.rate, self.omega);
        let d = r * r + w * w;
        if d == 0.0 {
            return Some(0.0);
        }
        let anti = |t: f64| -(-r * t).exp() * (r * (w * t).sin() + w * (w * t).cos()) / d;
        Some(anti(b) - anti(a))
    }
}

/// `e^{-rate t} cos(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedCosine {
    pub rate: f64,
    pub omega: f64,
}

impl ScalarProfile for DampedCosine {
    fn name(&self) -> String {
        format!("exp(-{} t) cos({} t)", self.rate, self.omega)
    }

    fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        (-self.rate * t).exp() * (self.omega * t).cos()
    }

    fn envelope(&self) -> (f64, f64) {
        (self.rate, 1.0)
    }

    fn oscillation(&self) -> f64 {
        self.omega.abs()
    }

    fn laplace(&self, s: Complex64) -> Option<Complex64> {
        let p = s + self.rate;
        if p.re <= 0.0 {
            return None;
        }
        Some(p / (p * p + self.omega * self.omega))
    }

    fn weighted_l1(&self, nu: f64) -> Option<f64> {
        let b = self.rate + nu;
        let w = self.omega.abs();
        if b <= 0.0 {
            return None;
        }
        if w == 0.0 {
            return Some(1.0 / b);
        }
        // One period of |cos| summed as a geometric series.
        let d = b * b + w * w;
        let half = (-b * std::f64::consts::PI / (2.0 * w)).exp();
        let period = half * half;
        Some((2.0 * w * half + b - b * period) / d / (1.0 - period))
    }

    fn integral(&self, a: f64, b: f64) -> Option<f64> {
        let (r, w) = (self.rate, self.omega);
        let d = r * r + w * w;
        if d == 0.0 {
            return Some(b - a);
        }
        let anti = |t: f64| (-r * t).exp() * (w * (w * t).sin() - r * (w * t).cos()) / d;
        Some(anti(b) - anti(a))
    }
}

/// A user-supplied closure with no closed forms.
#[derive(Clone)]
pub struct FnProfile {
    pub label: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub rate: f64,
    pub bound: f64,
    pub breaks: Vec<f64>,
    pub end: Option<f64>,
    pub omega: f64,
}

impl FnProfile {
    pub fn new<F>(label: &str, f: F, rate: f64, bound: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.to_string(),
            f: Arc::new(f),
            rate,
            bound,
            breaks: Vec::new(),
            end: None,
            omega: 0.0,
        }
    }
}

impl fmt::Debug for FnProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnProfile").field("label", &self.label).field("rate", &self.rate).finish()
    }
}

impl ScalarProfile for FnProfile {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || self.end.is_some_and(|e| t >= e) {
            0.0
        } else {
            (self.f)(t)
        }
    }

    fn envelope(&self) -> (f64, f64) {
        (self.rate, self.bound)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }

    fn support_end(&self) -> Option<f64> {
        self.end
    }

    fn oscillation(&self) -> f64 {
        self.omega
    }
}

pub type ProfileParams = BTreeMap<String, f64>;
type Builder = Box<dyn Fn(&ProfileParams) -> Result<Arc<dyn ScalarProfile>> + Send + Sync>;

/// Named profile families, addressed from kernel files.
pub struct ProfileRegistry {
    builders: BTreeMap<String, Builder>,
}

fn param(p: &ProfileParams, family: &str, key: &str) -> Result<f64> {
    p.get(key)
        .copied()
        .ok_or_else(|| Error::Config(format!("family `{family}` needs parameter `{key}`")))
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        let mut r = Self { builders: BTreeMap::new() };
        r.register("exponential", |p| {
            Ok(Arc::new(ExpWindow::exponential(param(p, "exponential", "rate")?)))
        });
        r.register("boxcar", |p| {
            let len = param(p, "boxcar", "length")?;
            if !(len > 0.0) {
                return Err(Error::Config("boxcar length must be positive".into()));
            }
            Ok(Arc::new(ExpWindow::boxcar(len)))
        });
        r.register("exp_window", |p| {
            let w = ExpWindow {
                rate: param(p, "exp_window", "rate")?,
                start: p.get("start").copied().unwrap_or(0.0),
                end: p.get("end").copied().unwrap_or(f64::INFINITY),
            };
            if !(w.end > w.start) || w.start < 0.0 {
                return Err(Error::Config("exp_window needs 0 <= start < end".into()));
            }
            Ok(Arc::new(w))
        });
        r.register("damped_cosine", |p| {
            Ok(Arc::new(DampedCosine {
                rate: param(p, "damped_cosine", "rate")?,
                omega: param(p, "damped_cosine", "omega")?,
            }))
        });
        r.register("damped_sine", |p| {
            Ok(Arc::new(DampedSine {
                rate: param(p, "damped_sine", "rate")?,
                omega: param(p, "damped_sine", "omega")?,
            }))
        });
        r
    }
}

impl ProfileRegistry {
    pub fn register<F>(&mut self, name: &str, build: F)
    where
        F: Fn(&ProfileParams) -> Result<Arc<dyn ScalarProfile>> + Send + Sync + 'static,
    {
        self.builders.insert(name.to_string(), Box::new(build));
    }

    pub fn build(&self, name: &str, params: &ProfileParams) -> Result<Arc<dyn ScalarProfile>> {
        let b = self.builders.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown kernel family `{name}` (known: {})",
                self.names().join(", ")
            ))
        })?;
        b(params)
    }

    pub fn names(&self) -> Vec<String> {
        self.builders.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_real;

    #[test]
    fn exp_window_integral_matches_quadrature() {
        let w = ExpWindow { rate: 0.7, start: 0.3, end: 2.1 };
        let q = integrate_real(|t| w.eval(t), 0.0, 3.0, &w.breakpoints(), 0.1);
        assert!((w.integral(0.0, 3.0).unwrap() - q).abs() < 1e-13);
        assert!((w.weighted_l1(0.5).unwrap() - integrate_real(|t| (-0.5 * t).exp() * w.eval(t), 0.0, 3.0, &w.breakpoints(), 0.1)).abs() < 1e-13);
    }

    #[test]
    fn tiny_intervals_keep_relative_accuracy() {
        let w = ExpWindow::exponential(1.0);
        let h = 1e-9;
        let exact = h - h * h / 2.0;
        assert!((w.integral(0.0, h).unwrap() - exact).abs() < 1e-22);
    }

    #[test]
    fn damped_sine_closed_forms() {
        let s = DampedSine { rate: 1.0, omega: 4.0 };
        let zeros: Vec<f64> = (1..60).map(|k| k as f64 * std::f64::consts::PI / 4.0).collect();
        let q = integrate_real(|t| (-0.5 * t).exp() * s.eval(t).abs(), 0.0, 40.0, &zeros, 0.01);
        assert!((s.weighted_l1(0.5).unwrap() - q).abs() < 1e-10);
        let q = integrate_real(|t| s.eval(t), 0.2, 1.7, &[], 0.01);
        assert!((s.integral(0.2, 1.7).unwrap() - q).abs() < 1e-13);
        let lap = s.laplace(Complex64::new(0.5, 0.0)).unwrap();
        let q = integrate_real(|t| (-0.5 * t).exp() * s.eval(t), 0.0, 40.0, &[], 0.01);
        assert!((lap.re - q).abs() < 1e-12 && lap.im == 0.0);
    }

    #[test]
    fn damped_cosine_closed_forms() {
        let c = DampedCosine { rate: 1.0, omega: 4.0 };
        let zeros: Vec<f64> = (0..60).map(|k| (k as f64 + 0.5) * std::f64::consts::PI / 4.0).collect();
        let q = integrate_real(|t| (-0.5 * t).exp() * c.eval(t).abs(), 0.0, 40.0, &zeros, 0.01);
        assert!((c.weighted_l1(0.5).unwrap() - q).abs() < 1e-12);
        let q = integrate_real(|t| c.eval(t), 0.2, 1.7, &[], 0.01);
        assert!((c.integral(0.2, 1.7).unwrap() - q).abs() < 1e-13);
        let s = Complex64::new(0.5, 3.0);
        let lap = c.laplace(s).unwrap();
        let q = crate::quadrature::integrate_complex(|t| (-s * t).exp() * c.eval(t), 0.0, 40.0, &[], 0.01);
        assert!((lap - q).norm() < 1e-12);
    }

    #[test]
    fn registry_builds_and_rejects() {
        let r = ProfileRegistry::default();
        let mut p = ProfileParams::new();
        p.insert("rate".into(), 2.0);
        assert!((r.build("exponential", &p).unwrap().eval(1.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!(r.build("boxcar", &p).is_err());
        assert!(r.build("nope", &p).is_err());
    }
}
