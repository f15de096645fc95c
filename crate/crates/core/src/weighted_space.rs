//! Exponentially weighted L2 signals on a uniform time grid, the Fourier-Laplace
//! transform, and the time derivative and its inverse as spectral multipliers.
//!
//! A [`WeightedSignal`] holds real samples `f(t_j)`, `t_j = t0 + j dt`, together with
//! the weight `nu`. The norm is `(∫ |f(t)|² e^{-2 nu t} dt)^{1/2}`, evaluated by the
//! trapezoid rule. Every binary operation demands equal grids and equal `nu`.
//!
//! The transform is `L_nu f = F(e^{-nu t} f)` with the unitary Fourier transform
//! `(F g)(xi) = (2 pi)^{-1/2} ∫ e^{-i xi t} g(t) dt`, discretized by the DFT on the
//! dual frequency grid `xi_k = 2 pi k / (n dt)` (k in FFT order).
//!
//! Sample `j` represents the cell `[t_j, t_j + dt)`. Causal integrals use the
//! left-endpoint rule, so the discrete antiderivative at `t_j` only sees samples
//! strictly before `t_j`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tolerances::MAX_EXPONENT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        if n < 2 {
            return Err(Error::Precondition(format!("grid needs at least 2 samples, got {n}")));
        }
        if !t0.is_finite() {
            return Err(Error::Precondition("grid start must be finite".into()));
        }
        Ok(Self { t0, dt, n })
    }

    /// Grid on `[t0, t0 + duration)` with step `dt`.
    pub fn spanning(t0: f64, duration: f64, dt: f64) -> Result<Self> {
        let n = (duration / dt).round() as usize;
        Self::new(t0, dt, n)
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.time(j)).collect()
    }

    /// Right end of the window, `t0 + n dt`.
    pub fn end(&self) -> f64 {
        self.time(self.n)
    }

    /// Index of the first sample with `t_j >= t` (within round-off), clamped to `n`.
    pub fn first_index_at_or_after(&self, t: f64) -> usize {
        let x = (t - self.t0) / self.dt;
        let k = (x - 1e-9).ceil();
        k.clamp(0.0, self.n as f64) as usize
    }

    /// Index of the sample at exactly `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < self.n {
            Some(k as usize)
        } else {
            None
        }
    }

    /// DFT dual frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n as i64;
        let scale = 2.0 * PI / (self.n as f64 * self.dt);
        (0..n)
            .map(|k| {
                let kk = if k < (n + 1) / 2 { k } else { k - n };
                kk as f64 * scale
            })
            .collect()
    }

    pub fn frequency_step(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dt)
    }

    fn same_as(&self, other: &TimeGrid) -> bool {
        self.n == other.n
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt.max(self.t0.abs())
    }

    fn check_weight_range(&self, nu: f64) -> Result<()> {
        let worst = (nu * self.t0).abs().max((nu * self.time(self.n - 1)).abs());
        if worst > MAX_EXPONENT {
            return Err(Error::Range(worst));
        }
        Ok(())
    }
}

/// Real vector-valued samples on a [`TimeGrid`] with weight `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSignal {
    grid: TimeGrid,
    nu: f64,
    dim: usize,
    /// Row-major `n x dim`.
    data: Vec<f64>,
}

impl WeightedSignal {
    pub fn new(grid: TimeGrid, nu: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Precondition(format!("weight nu must be positive, got {nu}")));
        }
        if dim == 0 {
            return Err(Error::DimensionMismatch("state dimension must be positive".into()));
        }
        if data.len() != grid.n * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values ({} samples x {dim}), got {}",
                grid.n * dim,
                grid.n,
                data.len()
            )));
        }
        Ok(Self { grid, nu, dim, data })
    }

    pub fn zeros(grid: TimeGrid, nu: f64, dim: usize) -> Result<Self> {
        Self::new(grid, nu, dim, vec![0.0; grid.n * dim])
    }

    pub fn from_fn<F>(grid: TimeGrid, nu: f64, dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, &mut [f64]),
    {
        let mut data = vec![0.0; grid.n * dim];
        for (j, row) in data.chunks_mut(dim).enumerate() {
            f(grid.time(j), row);
        }
        Self::new(grid, nu, dim, data)
    }

    pub fn scalar_from_fn<F: Fn(f64) -> f64>(grid: TimeGrid, nu: f64, f: F) -> Result<Self> {
        Self::from_fn(grid, nu, 1, |t, row| row[0] = f(t))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.n
    }

    pub fn is_empty(&self) -> bool {
        self.grid.n == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn value_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    /// Copy of components `range` as a new signal.
    pub fn slice_components(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.dim || range.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "component range {range:?} outside 0..{}",
                self.dim
            )));
        }
        let width = range.len();
        let mut data = Vec::with_capacity(self.len() * width);
        for row in self.rows() {
            data.extend_from_slice(&row[range.clone()]);
        }
        Self::new(self.grid, self.nu, width, data)
    }

    /// Same samples, different weight.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.grid, nu, self.dim, self.data.clone())
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        if self.nu != other.nu {
            return Err(Error::WeightMismatch { left: self.nu, right: other.nu });
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self::new(self.grid, self.nu, self.dim, data)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self::new(self.grid, self.nu, self.dim, data)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// `chi_{t <= a} f`: samples after `a` set to zero.
    pub fn cut_after(&self, a: f64) -> Self {
        let mut out = self.clone();
        for j in 0..self.len() {
            if self.grid.time(j) > a {
                out.value_mut(j).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        out
    }

    /// `chi_{t > a} f`: samples at or before `a` set to zero.
    pub fn cut_before(&self, a: f64) -> Self {
        let mut out = self.clone();
        for j in 0..self.len() {
            if self.grid.time(j) <= a {
                out.value_mut(j).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm(&self) -> f64 {
        weighted_norm(self)
    }

    /// Tail weight `e^{-2 nu t_last} |f(t_last)|²`, reported as a window-truncation diagnostic.
    pub fn truncation_diagnostic(&self) -> f64 {
        let last = self.len() - 1;
        let t = self.grid.time(last);
        let v2: f64 = self.value(last).iter().map(|x| x * x).sum();
        (-2.0 * self.nu * t).exp() * v2
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for c in 0..self.dim {
            let _ = write!(s, ",c{c}");
        }
        s.push('\n');
        for j in 0..self.len() {
            let _ = write!(s, "{:.15e}", self.grid.time(j));
            for x in self.value(j) {
                let _ = write!(s, ",{x:.15e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the CSV layout written by [`to_csv`](Self::to_csv). The grid is inferred
    /// from the time column, which must be uniform.
    pub fn from_csv(text: &str, nu: f64) -> Result<Self> {
        let (times, dim, data) = parse_csv_table(text)?;
        if times.len() < 2 {
            return Err(Error::Config("signal CSV needs at least two rows".into()));
        }
        let dt = times[1] - times[0];
        check_uniform(&times, dt)?;
        let grid = TimeGrid::new(times[0], dt, times.len())?;
        Self::new(grid, nu, dim, data)
    }

    pub fn read_csv(path: &Path, nu: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, nu)
    }
}

pub(crate) fn check_uniform(times: &[f64], dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Config("time column must be increasing".into()));
    }
    for (j, t) in times.iter().enumerate() {
        if (t - (times[0] + j as f64 * dt)).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Config(format!("non-uniform time column at row {j}")));
        }
    }
    Ok(())
}

/// Reads `t,c0,c1,...` tables: returns the time column, the column count after `t`,
/// and the remaining values row-major.
pub(crate) fn parse_csv_table(text: &str) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Config(format!("CSV header must start with `t,` and name at least one column, got `{header}`")));
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::Config(format!("CSV row {row} has {} fields, expected {}", fields.len(), dim + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("CSV row {row}: cannot parse `{s}`: {e}")))
        };
        times.push(parse(fields[0])?);
        for f in &fields[1..] {
            data.push(parse(f)?);
        }
    }
    Ok((times, dim, data))
}

/// Trapezoid-rule weights `w_j` with `∫ h ≈ Σ w_j h(t_j)`.
fn trapezoid_weight(j: usize, n: usize, dt: f64) -> f64 {
    if j == 0 || j + 1 == n {
        0.5 * dt
    } else {
        dt
    }
}

/// `∫ f(t)·g(t) e^{-2 nu t} dt` by the trapezoid rule.
pub fn weighted_inner_product(f: &WeightedSignal, g: &WeightedSignal) -> Result<f64> {
    f.check_compatible(g)?;
    let grid = f.grid;
    let mut acc = 0.0;
    for j in 0..grid.n {
        let w = trapezoid_weight(j, grid.n, grid.dt) * (-2.0 * f.nu * grid.time(j)).exp();
        let dot: f64 = f.value(j).iter().zip(g.value(j)).map(|(a, b)| a * b).sum();
        acc += w * dot;
    }
    Ok(acc)
}

pub fn weighted_norm(f: &WeightedSignal) -> f64 {
    let grid = f.grid;
    let mut acc = 0.0;
    for j in 0..grid.n {
        let w = trapezoid_weight(j, grid.n, grid.dt) * (-2.0 * f.nu * grid.time(j)).exp();
        acc += w * f.value(j).iter().map(|x| x * x).sum::<f64>();
    }
    acc.sqrt()
}

/// Weighted norm of `f` restricted to samples with `t_j <= a`.
pub fn weighted_norm_up_to(f: &WeightedSignal, a: f64) -> f64 {
    weighted_norm(&f.cut_after(a))
}

/// `L_nu f` sampled on the dual frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: TimeGrid,
    nu: f64,
    dim: usize,
    frequencies: Vec<f64>,
    /// Row-major `n x dim`; row `k` belongs to `frequencies[k]`.
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TimeGrid, nu: f64, dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.n * dim {
            return Err(Error::DimensionMismatch(format!(
                "spectrum expects {} values, got {}",
                grid.n * dim,
                data.len()
            )));
        }
        Ok(Self { frequencies: grid.frequencies(), grid, nu, dim, data })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn value(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// `Σ_k a_k^* b_k dxi` (rectangle rule over the dual grid).
    pub fn inner_product(&self, other: &Spectrum) -> Result<Complex64> {
        if self.dim != other.dim || self.grid.n != other.grid.n || self.nu != other.nu {
            return Err(Error::DimensionMismatch("spectra live on different grids".into()));
        }
        let dxi = self.grid.frequency_step();
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        Ok(s * dxi)
    }

    pub fn norm(&self) -> f64 {
        let dxi = self.grid.frequency_step();
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * dxi).sqrt()
    }

    /// Multiplies each frequency row by `m(xi_k)`.
    pub fn map_multiplier<F: Fn(f64) -> Complex64>(&mut self, m: F) {
        for k in 0..self.grid.n {
            let factor = m(self.frequencies[k]);
            for z in self.value_mut(k) {
                *z *= factor;
            }
        }
    }
}

pub fn fourier_laplace(f: &WeightedSignal) -> Result<Spectrum> {
    let grid = f.grid;
    grid.check_weight_range(f.nu)?;
    let n = grid.n;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let xis = grid.frequencies();
    let scale = grid.dt / (2.0 * PI).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); n * f.dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..f.dim {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new((-f.nu * grid.time(j)).exp() * f.value(j)[c], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n {
            let phase = Complex64::new(0.0, -xis[k] * grid.t0).exp();
            data[k * f.dim + c] = buf[k] * phase * scale;
        }
    }
    Spectrum::new(grid, f.nu, f.dim, data)
}

/// Inverse of [`fourier_laplace`]. Signals are real, so the real part of the
/// reconstruction is returned.
pub fn inverse_fourier_laplace(s: &Spectrum, grid: &TimeGrid) -> Result<WeightedSignal> {
    if !s.grid.same_as(grid) {
        return Err(Error::GridMismatch(format!("spectrum grid {:?} vs {:?}", s.grid, grid)));
    }
    grid.check_weight_range(s.nu)?;
    let n = grid.n;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let xis = grid.frequencies();
    let scale = (2.0 * PI).sqrt() / (grid.dt * n as f64);
    let mut data = vec![0.0; n * s.dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..s.dim {
        for k in 0..n {
            buf[k] = s.data[k * s.dim + c] * Complex64::new(0.0, xis[k] * grid.t0).exp();
        }
        ifft.process(&mut buf);
        for j in 0..n {
            data[j * s.dim + c] = (buf[j] * scale).re * (s.nu * grid.time(j)).exp();
        }
    }
    WeightedSignal::new(*grid, s.nu, s.dim, data)
}

/// `∂_0^p f` for `p = ±1` through the multiplier `(i xi + nu)^p`.
///
/// The DFT wraps around the window, so the `p = -1` result is causal only up to the
/// window-truncation error; use [`causal_antiderivative`] where exact causality matters.
pub fn apply_derivative_power(f: &WeightedSignal, p: i32) -> Result<WeightedSignal> {
    if p != 1 && p != -1 {
        return Err(Error::Precondition(format!("derivative power must be +1 or -1, got {p}")));
    }
    let nu = f.nu;
    let mut s = fourier_laplace(f)?;
    s.map_multiplier(|xi| {
        let sym = Complex64::new(nu, xi);
        if p == 1 {
            sym
        } else {
            sym.inv()
        }
    });
    inverse_fourier_laplace(&s, &f.grid)
}

/// `t ↦ ∫_{-∞}^t f(s) ds` by the left-endpoint rule: `U_j = dt Σ_{k<j} f_k`.
///
/// Strictly causal: if `f` vanishes before `a` then so does the result, up to and
/// including the sample at `a`.
pub fn causal_antiderivative(f: &WeightedSignal) -> WeightedSignal {
    let dim = f.dim;
    let mut out = vec![0.0; f.data.len()];
    let mut acc = vec![0.0; dim];
    for j in 0..f.len() {
        out[j * dim..(j + 1) * dim].copy_from_slice(&acc);
        for (a, x) in acc.iter_mut().zip(f.value(j)) {
            *a += f.grid.dt * x;
        }
    }
    WeightedSignal { grid: f.grid, nu: f.nu, dim, data: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_signal(grid: TimeGrid, nu: f64, a: f64, b: f64) -> WeightedSignal {
        WeightedSignal::scalar_from_fn(grid, nu, |t| if t >= a - 1e-12 && t < b - 1e-12 { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(TimeGrid::new(0.0, 0.0, 8).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 1).is_err());
        assert!(TimeGrid::new(0.0, -0.1, 8).is_err());
    }

    #[test]
    fn frequencies_follow_fft_order() {
        let g = TimeGrid::new(0.0, 0.5, 4).unwrap();
        let f = g.frequencies();
        let s = 2.0 * PI / 2.0;
        assert_eq!(f, vec![0.0, s, -2.0 * s, -s]);
    }

    #[test]
    fn inner_product_of_zero_is_zero() {
        let g = TimeGrid::new(0.0, 0.01, 64).unwrap();
        let z = WeightedSignal::zeros(g, 1.0, 2).unwrap();
        assert_eq!(weighted_inner_product(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_of_unit_box() {
        // ∫_0^1 e^{-2t} dt = (1 - e^{-2})/2; the jump costs O(dt) under the trapezoid rule.
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((exact - 0.43233).abs() < 1e-5);
        let mut errs = Vec::new();
        for &n in &[1024usize, 2048, 4096] {
            let dt = 4.0 / n as f64;
            let g = TimeGrid::new(-1.0, dt, n).unwrap();
            let f = box_signal(g, 1.0, 0.0, 1.0);
            let v = weighted_inner_product(&f, &f).unwrap();
            errs.push((v - exact).abs());
        }
        assert!(errs[0] < 5e-3);
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
    }

    #[test]
    fn inner_product_of_disjoint_boxes() {
        let g = TimeGrid::new(0.0, 0.01, 512).unwrap();
        let f = box_signal(g, 1.0, 0.0, 1.0);
        let h = box_signal(g, 1.0, 2.0, 3.0);
        assert_eq!(weighted_inner_product(&f, &h).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_weight_is_rejected() {
        let g = TimeGrid::new(0.0, 0.01, 16).unwrap();
        let a = WeightedSignal::zeros(g, 1.0, 1).unwrap();
        let b = WeightedSignal::zeros(g, 2.0, 1).unwrap();
        assert!(matches!(weighted_inner_product(&a, &b), Err(Error::WeightMismatch { .. })));
        let c = WeightedSignal::zeros(TimeGrid::new(0.0, 0.02, 16).unwrap(), 1.0, 1).unwrap();
        assert!(matches!(weighted_inner_product(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn transform_of_zero_is_zero() {
        let g = TimeGrid::new(0.0, 0.01, 64).unwrap();
        let z = WeightedSignal::zeros(g, 1.0, 3).unwrap();
        let s = fourier_laplace(&z).unwrap();
        assert!(s.data().iter().all(|c| c.norm() == 0.0));
        let back = inverse_fourier_laplace(&s, &g).unwrap();
        assert!(back.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn extreme_weight_reports_range_error() {
        let g = TimeGrid::new(0.0, 1.0, 1024).unwrap();
        let f = WeightedSignal::zeros(g, 5.0, 1).unwrap();
        assert!(matches!(fourier_laplace(&f), Err(Error::Range(_))));
    }

    #[test]
    fn gaussian_spectrum_matches_closed_form() {
        // e^{nu t} e^{-(t-5)^2} has weighted samples e^{-(t-5)^2}, whose unitary Fourier
        // transform is (1/sqrt 2) e^{-xi^2/4} e^{-5 i xi}.
        let nu = 0.5;
        let g = TimeGrid::new(0.0, 10.0 / 512.0, 512).unwrap();
        let f = WeightedSignal::scalar_from_fn(g, nu, |t| (nu * t).exp() * (-(t - 5.0f64).powi(2)).exp()).unwrap();
        let s = fourier_laplace(&f).unwrap();
        for (k, &xi) in s.frequencies().iter().enumerate() {
            let exact = Complex64::new(0.0, -5.0 * xi).exp() * ((-xi * xi / 4.0).exp() / 2f64.sqrt());
            assert!((s.value(k)[0] - exact).norm() < 1e-10, "xi = {xi}");
        }
    }

    #[test]
    fn causal_antiderivative_of_box() {
        let g = TimeGrid::new(-1.0, 1.0 / 64.0, 256).unwrap();
        let f = box_signal(g, 1.0, 0.0, 1.0);
        let u = causal_antiderivative(&f);
        for j in 0..g.n {
            let t = g.time(j);
            assert!((u.value(j)[0] - t.clamp(0.0, 1.0)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn csv_round_trip_keeps_values() {
        let g = TimeGrid::new(-0.5, 0.25, 4).unwrap();
        let f = WeightedSignal::from_fn(g, 1.5, 2, |t, r| {
            r[0] = t.sin();
            r[1] = 1.0 / 3.0;
        })
        .unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("t,c0,c1\n"));
        let back = WeightedSignal::from_csv(&text, 1.5).unwrap();
        assert_eq!(back.grid().n, 4);
        for (a, b) in f.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn csv_rejects_non_uniform_time() {
        assert!(WeightedSignal::from_csv("t,c0\n0,1\n1,2\n3,4\n", 1.0).is_err());
        assert!(WeightedSignal::from_csv("x,c0\n0,1\n1,2\n", 1.0).is_err());
    }

    #[test]
    fn truncation_diagnostic_reports_tail() {
        let g = TimeGrid::new(0.0, 0.5, 4).unwrap();
        let f = WeightedSignal::scalar_from_fn(g, 1.0, |_| 2.0).unwrap();
        let expect = (-2.0f64 * 1.5).exp() * 4.0;
        assert!((f.truncation_diagnostic() - expect).abs() < 1e-15);
    }
}
