//! Material laws `M(z)` assembled from constant, kernel and resolvent blocks, evaluated
//! on the disc `B(r, r)` through `z^{-1} = i xi + nu`.

mod margin;

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::OperatorKernel;
use crate::linalg::{is_symmetric, to_complex, CMatrix, RMatrix};
use crate::operators::Layout;

pub use margin::{
    abs_cont_bound, analytic_margin, hyp_b_bound, hyp_c_bound, parabolic_margin, solvability_margin,
    MarginGrid, SolvabilityReport,
};

/// One block of a material law.
#[derive(Debug, Clone)]
pub enum BlockKind {
    /// `M0`.
    Const(RMatrix),
    /// `z N`.
    ZConst(RMatrix),
    /// `1 + sqrt(2 pi) Ĉ(-i z^{-1})`.
    Hyp0(OperatorKernel),
    /// `(1 - sqrt(2 pi) B̂(-i z^{-1}))^{-1}`.
    Hyp1(OperatorKernel),
    /// `z (1 + sqrt(2 pi) Ĉ(-i z^{-1}))`.
    Par2(OperatorKernel),
    /// `z (1 - sqrt(2 pi) B̂(-i z^{-1}))^{-1}`.
    Par3(OperatorKernel),
}

impl BlockKind {
    pub fn kernel(&self) -> Option<&OperatorKernel> {
        match self {
            BlockKind::Hyp0(k) | BlockKind::Hyp1(k) | BlockKind::Par2(k) | BlockKind::Par3(k) => Some(k),
            _ => None,
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            BlockKind::Const(m) | BlockKind::ZConst(m) => m.shape(),
            _ => {
                let d = self.kernel().unwrap().dim();
                (d, d)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BlockKind::Const(_) => "Const",
            BlockKind::ZConst(_) => "ZConst",
            BlockKind::Hyp0(_) => "Hyp0",
            BlockKind::Hyp1(_) => "Hyp1",
            BlockKind::Par2(_) => "Par2",
            BlockKind::Par3(_) => "Par3",
        }
    }

    /// True for the blocks carrying a factor `z` (they act without `∂_0` in time).
    pub fn is_z_linear(&self) -> bool {
        matches!(self, BlockKind::ZConst(_) | BlockKind::Par2(_) | BlockKind::Par3(_))
    }

    /// True for the resolvent blocks `(1 - sqrt(2 pi) B̂)^{-1}`.
    pub fn is_resolvent(&self) -> bool {
        matches!(self, BlockKind::Hyp1(_) | BlockKind::Par3(_))
    }
}

/// Eigendecomposition `M = Q diag(λ) Q^T` of a single-term symmetric kernel `g(t) M`.
#[derive(Debug, Clone)]
struct Spectral {
    q: RMatrix,
    lambda: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub kind: BlockKind,
    /// Optional symmetric `S`: the block is `S X S`.
    pub congruence: Option<RMatrix>,
    spectral: Option<Spectral>,
}

impl Entry {
    fn new(row: usize, col: usize, kind: BlockKind, congruence: Option<RMatrix>) -> Self {
        let spectral = kind.kernel().and_then(|k| k.single_term()).and_then(|t| {
            if !is_symmetric(&t.matrix, 1e-14) {
                return None;
            }
            let e = t.matrix.clone().symmetric_eigen();
            Some(Spectral { q: e.eigenvectors, lambda: e.eigenvalues.iter().copied().collect() })
        });
        Self { row, col, kind, congruence, spectral }
    }

    /// `sqrt(2 pi) B̂(xi - i nu)`.
    fn scaled_transform(&self, k: &OperatorKernel, xi: f64, nu: f64) -> Result<CMatrix> {
        Ok(k.laplace(Complex64::new(nu, xi))?)
    }

    /// The block value (without the outer congruence) at `z^{-1} = i xi + nu`.
    fn core(&self, xi: f64, nu: f64) -> Result<CMatrix> {
        let w = Complex64::new(nu, xi);
        let z = w.inv();
        Ok(match &self.kind {
            BlockKind::Const(m) => to_complex(m),
            BlockKind::ZConst(n) => to_complex(n) * z,
            BlockKind::Hyp0(k) | BlockKind::Par2(k) => {
                let x = self.scaled_transform(k, xi, nu)?;
                let m = CMatrix::identity(k.dim(), k.dim()) + x;
                if matches!(self.kind, BlockKind::Par2(_)) {
                    m * z
                } else {
                    m
                }
            }
            BlockKind::Hyp1(k) | BlockKind::Par3(k) => {
                let inv = self.resolvent(k, xi, nu)?;
                if matches!(self.kind, BlockKind::Par3(_)) {
                    inv * z
                } else {
                    inv
                }
            }
        })
    }

    fn resolvent(&self, k: &OperatorKernel, xi: f64, nu: f64) -> Result<CMatrix> {
        let w = Complex64::new(nu, xi);
        k.check_nu(nu)?;
        let closed = k.single_term().and_then(|t| t.profile.laplace(w));
        let (Some(sp), Some(l)) = (&self.spectral, closed) else {
            return self.resolvent_dense(k, xi, nu);
        };
        let norm = l.norm() * sp.lambda.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm >= 1.0 {
            return Err(Error::NotInvertible { norm, z: w.inv() });
        }
        let m = k.dim();
        let d: Vec<Complex64> = sp.lambda.iter().map(|&lam| (1.0 - l * lam).inv()).collect();
        let qc = to_complex(&sp.q);
        let scaled = DMatrix::from_fn(m, m, |i, j| qc[(i, j)] * d[j]);
        Ok(scaled * qc.transpose())
    }

    fn resolvent_dense(&self, k: &OperatorKernel, xi: f64, nu: f64) -> Result<CMatrix> {
        let w = Complex64::new(nu, xi);
        let x = self.scaled_transform(k, xi, nu)?;
        let norm = crate::linalg::op_norm(&x);
        if norm >= 1.0 {
            return Err(Error::NotInvertible { norm, z: w.inv() });
        }
        let m = k.dim();
        let a = CMatrix::identity(m, m) - x;
        a.lu().try_inverse().ok_or(Error::NotInvertible { norm, z: w.inv() })
    }

    fn value(&self, xi: f64, nu: f64) -> Result<CMatrix> {
        let core = self.core(xi, nu)?;
        Ok(match &self.congruence {
            Some(s) => {
                let sc = to_complex(s);
                &sc * core * &sc
            }
            None => core,
        })
    }
}

/// A block layout of fields and a list of block entries.
#[derive(Debug, Clone)]
pub struct MaterialLaw {
    fields: Layout,
    offsets: Vec<usize>,
    entries: Vec<Entry>,
    r: f64,
}

impl MaterialLaw {
    pub fn new(fields: Layout) -> Self {
        let mut offsets = Vec::with_capacity(fields.len() + 1);
        let mut acc = 0;
        for (_, d) in &fields {
            offsets.push(acc);
            acc += d;
        }
        offsets.push(acc);
        Self { fields, offsets, entries: Vec::new(), r: f64::INFINITY }
    }

    /// A law on a single field `u`.
    pub fn single(dim: usize, kind: BlockKind) -> Result<Self> {
        Self::new(vec![("u".into(), dim)]).with_entry("u", "u", kind)
    }

    /// Restricts the disc of validity to `B(r, r)`.
    pub fn with_radius(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Precondition(format!("radius must be positive, got {r}")));
        }
        self.r = r;
        Ok(self)
    }

    pub fn with_entry(self, row: &str, col: &str, kind: BlockKind) -> Result<Self> {
        self.push(row, col, kind, None)
    }

    /// Adds `S X S` with symmetric `S`.
    pub fn with_conjugated_entry(self, row: &str, col: &str, kind: BlockKind, s: RMatrix) -> Result<Self> {
        if !is_symmetric(&s, 1e-12) {
            return Err(Error::Precondition("congruence factor must be symmetric".into()));
        }
        self.push(row, col, kind, Some(s))
    }

    fn push(mut self, row: &str, col: &str, kind: BlockKind, s: Option<RMatrix>) -> Result<Self> {
        let ri = self.field_index(row)?;
        let ci = self.field_index(col)?;
        let want = (self.fields[ri].1, self.fields[ci].1);
        if kind.shape() != want {
            return Err(Error::DimensionMismatch(format!(
                "block ({row}, {col}) must be {want:?}, got {:?}",
                kind.shape()
            )));
        }
        if let Some(s) = &s {
            if ri != ci || s.shape() != want {
                return Err(Error::DimensionMismatch("congruence needs a square diagonal block".into()));
            }
        }
        if self.entries.iter().any(|e| e.row == ri && e.col == ci) {
            return Err(Error::Precondition(format!("block ({row}, {col}) given twice")));
        }
        self.entries.push(Entry::new(ri, ci, kind, s));
        Ok(self)
    }

    pub fn field_index(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Config(format!("unknown field `{name}`")))
    }

    pub fn fields(&self) -> &Layout {
        &self.fields
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn field_range(&self, idx: usize) -> std::ops::Range<usize> {
        self.offsets[idx]..self.offsets[idx + 1]
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Largest decay parameter among the kernels.
    pub fn mu(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.kind.kernel()).fold(0.0, |m, k| m.max(k.mu()))
    }

    /// `M(z)` at `z = 1/(i xi + nu)`.
    pub fn evaluate_line(&self, xi: f64, nu: f64) -> Result<CMatrix> {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for e in &self.entries {
            let v = e.value(xi, nu)?;
            let (r0, c0) = (self.offsets[e.row], self.offsets[e.col]);
            let mut view = out.view_mut((r0, c0), v.shape());
            view += v;
        }
        Ok(out)
    }

    /// `M(z)` for `z` in the disc `B(r, r)`.
    pub fn evaluate(&self, z: Complex64) -> Result<CMatrix> {
        let w = z.inv();
        if !(w.re > 1.0 / (2.0 * self.r)) || !w.re.is_finite() {
            return Err(Error::Precondition(format!("z = {z} lies outside the disc B({0}, {0})", self.r)));
        }
        self.evaluate_line(w.im, w.re)
    }

    /// `z^{-1} M(z) = (i xi + nu) M(z)`.
    pub fn symbol(&self, xi: f64, nu: f64) -> Result<CMatrix> {
        Ok(self.evaluate_line(xi, nu)? * Complex64::new(nu, xi))
    }

    /// Largest `‖sqrt(2 pi) B̂‖` over the resolvent blocks on the line `nu = 1/(2r)`.
    pub fn neumann_sup(&self, r: f64, xis: &[f64]) -> Result<f64> {
        let nu = 1.0 / (2.0 * r);
        let mut s: f64 = 0.0;
        for e in self.entries.iter().filter(|e| e.kind.is_resolvent()) {
            let k = e.kind.kernel().unwrap();
            for &xi in xis {
                s = s.max(crate::linalg::op_norm(&k.laplace(Complex64::new(nu, xi))?));
            }
        }
        Ok(s)
    }
}

impl fmt::Display for MaterialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.fields.iter().map(|(n, d)| format!("{n}[{d}]")).collect();
        write!(f, "fields {}", names.join(", "))?;
        for e in &self.entries {
            write!(
                f,
                "; ({}, {}) {}{}",
                self.fields[e.row].0,
                self.fields[e.col].0,
                e.kind.label(),
                if e.congruence.is_some() { " conjugated" } else { "" }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eye(n: usize) -> RMatrix {
        RMatrix::identity(n, n)
    }

    #[test]
    fn constant_and_zero_resolvent_are_identity() {
        let c = MaterialLaw::single(3, BlockKind::Const(eye(3))).unwrap();
        let z = Complex64::new(0.1, 0.05);
        assert!((c.evaluate(z).unwrap() - CMatrix::identity(3, 3)).camax() == 0.0);
        let h = MaterialLaw::single(3, BlockKind::Hyp1(OperatorKernel::zero(3))).unwrap();
        assert!((h.evaluate(z).unwrap() - CMatrix::identity(3, 3)).camax() < 1e-15);
    }

    #[test]
    fn hyp0_exponential_on_real_axis() {
        let law = MaterialLaw::single(2, BlockKind::Hyp0(OperatorKernel::exponential(1.0, eye(2)).unwrap())).unwrap();
        for &nu in &[0.5, 1.0, 4.0] {
            let m = law.evaluate(Complex64::new(1.0 / nu, 0.0)).unwrap();
            let expect = 1.0 + 1.0 / (1.0 + nu);
            assert!((m[(0, 0)].re - expect).abs() < 1e-14 && m[(0, 0)].im.abs() < 1e-15);
            assert!(m[(0, 1)].norm() == 0.0);
        }
    }

    #[test]
    fn resolvent_block_matches_dense_inverse() {
        let m0 = RMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let spectral = MaterialLaw::single(2, BlockKind::Par3(OperatorKernel::exponential(1.0, m0.clone()).unwrap())).unwrap();
        let s = RMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let conj = MaterialLaw::new(vec![("u".into(), 2)])
            .with_conjugated_entry("u", "u", BlockKind::Hyp1(OperatorKernel::exponential(1.0, m0.clone()).unwrap()), s.clone())
            .unwrap();
        for &(xi, nu) in &[(0.0, 0.5), (3.0, 1.0), (-7.0, 2.0)] {
            let w = Complex64::new(nu, xi);
            let x = to_complex(&m0) * (1.0 / (1.0 + w));
            let inv = (CMatrix::identity(2, 2) - x).try_inverse().unwrap();
            let got = spectral.evaluate_line(xi, nu).unwrap();
            assert!((got - &inv * w.inv()).camax() < 1e-14);
            let sc = to_complex(&s);
            let got = conj.evaluate_line(xi, nu).unwrap();
            assert!((got - &sc * &inv * &sc).camax() < 1e-13);
        }
    }

    #[test]
    fn neumann_failure_is_reported() {
        // |sqrt(2 pi) B̂| = 2/(1 + nu) >= 1 for nu <= 1.
        let law = MaterialLaw::single(1, BlockKind::Hyp1(OperatorKernel::exponential(1.0, eye(1) * 2.0).unwrap())).unwrap();
        assert!(matches!(law.evaluate_line(0.0, 0.5), Err(Error::NotInvertible { .. })));
        assert!(law.evaluate_line(0.0, 2.0).is_ok());
        assert!((law.neumann_sup(0.25, &[0.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disc_membership_is_enforced() {
        let law = MaterialLaw::single(1, BlockKind::Const(eye(1))).unwrap().with_radius(0.5).unwrap();
        // z = 1 has z^{-1} = 1 = 1/(2r): on the boundary, not inside.
        assert!(law.evaluate(Complex64::new(1.0, 0.0)).is_err());
        assert!(law.evaluate(Complex64::new(0.5, 0.0)).is_ok());
    }

    #[test]
    fn shape_errors() {
        let law = MaterialLaw::new(vec![("a".into(), 2), ("b".into(), 3)]);
        assert!(law.clone().with_entry("a", "b", BlockKind::Const(eye(2))).is_err());
        assert!(law.clone().with_entry("a", "c", BlockKind::Const(eye(2))).is_err());
        let ok = law.with_entry("a", "b", BlockKind::ZConst(RMatrix::zeros(2, 3))).unwrap();
        assert_eq!(ok.dim(), 5);
        assert!(ok.with_entry("a", "b", BlockKind::ZConst(RMatrix::zeros(2, 3))).is_err());
    }

    #[test]
    fn mean_value_property_on_a_circle() {
        let law = MaterialLaw::new(vec![("v".into(), 2), ("q".into(), 2)])
            .with_entry("v", "v", BlockKind::Par2(OperatorKernel::exponential(1.0, eye(2) * 0.3).unwrap()))
            .unwrap()
            .with_entry("q", "q", BlockKind::Hyp1(OperatorKernel::exponential(2.0, eye(2) * 0.5).unwrap()))
            .unwrap()
            .with_entry("v", "q", BlockKind::ZConst(eye(2)))
            .unwrap()
            .with_radius(1.0)
            .unwrap();
        let center = Complex64::new(1.0, 0.2);
        let rad = 0.1;
        let n = 64;
        let mut mean = CMatrix::zeros(4, 4);
        for k in 0..n {
            let z = center + Complex64::from_polar(rad, 2.0 * PI * k as f64 / n as f64);
            mean += law.evaluate(z).unwrap();
        }
        mean /= Complex64::new(n as f64, 0.0);
        let c = law.evaluate(center).unwrap();
        assert!((mean - &c).camax() <= 1e-6 * c.camax());
    }
}
