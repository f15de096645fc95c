//! The material law as a causal operator on grid samples.
//!
//! Blocks carrying a factor `z` act without `∂_0`; the rest sit under `∂_0`. So the
//! time-domain operator is `∂_0 P u + Q u` and every entry contributes
//! `E0 u_j + H_j`, an instantaneous matrix plus a history sum over earlier states.
//! Resolvent blocks step the auxiliary `w = (1 - B*)^{-1} (S u)` through
//! `w_j = S u_j + Σ_{l>=1} W_l w_{j-l}`.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::kernels::LagWeights;
use crate::linalg::RMatrix;
use crate::material_laws::{BlockKind, MaterialLaw};

#[derive(Debug, Clone)]
struct DiscreteEntry {
    rows: Range<usize>,
    cols: Range<usize>,
    s: Option<RMatrix>,
    weights: Option<LagWeights>,
    resolvent: bool,
    z_linear: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct DiscreteLaw {
    dim: usize,
    entries: Vec<DiscreteEntry>,
    e0_p: RMatrix,
    e0_q: RMatrix,
}

/// Stored states of the convolution entries.
pub(crate) struct LawState {
    store: Vec<Vec<f64>>,
    hist: Vec<Vec<f64>>,
}

fn mat_vec(m: &RMatrix, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = (0..x.len()).map(|c| m[(r, c)] * x[c]).sum();
    }
}

impl DiscreteLaw {
    pub(crate) fn new(law: &MaterialLaw, dt: f64, n: usize) -> Result<Self> {
        let dim = law.dim();
        let mut e0_p = DMatrix::zeros(dim, dim);
        let mut e0_q = DMatrix::zeros(dim, dim);
        let mut entries = Vec::new();
        for e in law.entries() {
            let rows = law.field_range(e.row);
            let cols = law.field_range(e.col);
            let core = match &e.kind {
                BlockKind::Const(m) | BlockKind::ZConst(m) => m.clone(),
                other => {
                    let d = other.kernel().unwrap().dim();
                    DMatrix::identity(d, d)
                }
            };
            let e0 = match &e.congruence {
                Some(s) => s * &core * s,
                None => core,
            };
            let target = if e.kind.is_z_linear() { &mut e0_q } else { &mut e0_p };
            let mut view = target.view_mut((rows.start, cols.start), e0.shape());
            view += &e0;
            let weights = e.kind.kernel().filter(|k| !k.is_zero()).map(|k| k.lag_weights(dt, n));
            entries.push(DiscreteEntry {
                rows,
                cols,
                s: e.congruence.clone(),
                weights,
                resolvent: e.kind.is_resolvent(),
                z_linear: e.kind.is_z_linear(),
            });
        }
        Ok(Self { dim, entries, e0_p, e0_q })
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    /// Instantaneous part of the `∂_0`-carrying blocks.
    pub(crate) fn e0_p(&self) -> &RMatrix {
        &self.e0_p
    }

    /// Instantaneous part of the `z`-linear blocks.
    pub(crate) fn e0_q(&self) -> &RMatrix {
        &self.e0_q
    }

    pub(crate) fn state(&self, n: usize) -> LawState {
        let store = self
            .entries
            .iter()
            .map(|e| if e.weights.is_some() { vec![0.0; n * e.cols.len()] } else { Vec::new() })
            .collect();
        let hist = self.entries.iter().map(|e| vec![0.0; e.rows.len()]).collect();
        LawState { store, hist }
    }

    /// Adds the history contributions at step `j` into `hp` (P blocks) and `hq` (Q blocks).
    pub(crate) fn begin_step(&self, j: usize, st: &mut LawState, hp: &mut [f64], hq: &mut [f64]) {
        hp.iter_mut().for_each(|v| *v = 0.0);
        hq.iter_mut().for_each(|v| *v = 0.0);
        for (i, e) in self.entries.iter().enumerate() {
            let Some(w) = &e.weights else { continue };
            let d = e.cols.len();
            let h = &mut st.hist[i];
            w.history(j, &st.store[i], d, h);
            let target = if e.z_linear { &mut *hq } else { &mut *hp };
            let out = &mut target[e.rows.clone()];
            match &e.s {
                Some(s) => {
                    let mut tmp = vec![0.0; d];
                    mat_vec(s, h, &mut tmp);
                    out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
                }
                None => out.iter_mut().zip(h.iter()).for_each(|(o, t)| *o += t),
            }
        }
    }

    /// Records the state `x_j` after the step.
    pub(crate) fn end_step(&self, j: usize, x: &[f64], st: &mut LawState) {
        for (i, e) in self.entries.iter().enumerate() {
            if e.weights.is_none() {
                continue;
            }
            let d = e.cols.len();
            let xc = &x[e.cols.clone()];
            let slot = &mut st.store[i][j * d..(j + 1) * d];
            match &e.s {
                Some(s) => mat_vec(s, xc, slot),
                None => slot.copy_from_slice(xc),
            }
            if e.resolvent {
                slot.iter_mut().zip(&st.hist[i]).for_each(|(v, h)| *v += h);
            }
        }
    }

    /// `(P u, Q u)` sample by sample for `n` states of width `dim`.
    pub(crate) fn apply(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim;
        let n = u.len() / dim;
        let mut st = self.state(n);
        let mut pu = vec![0.0; u.len()];
        let mut qu = vec![0.0; u.len()];
        let mut tmp = vec![0.0; dim];
        for j in 0..n {
            let x = &u[j * dim..(j + 1) * dim];
            let (hp, hq) = (&mut pu[j * dim..(j + 1) * dim], &mut qu[j * dim..(j + 1) * dim]);
            self.begin_step(j, &mut st, hp, hq);
            mat_vec(&self.e0_p, x, &mut tmp);
            hp.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            mat_vec(&self.e0_q, x, &mut tmp);
            hq.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            self.end_step(j, x, &mut st);
        }
        (pu, qu)
    }
}

/// Backward difference `(y_j - y_{j-1})/dt` with `y_{-1} = 0`.
pub(crate) fn backward_difference(y: &[f64], dim: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let prev = if i >= dim { y[i - dim] } else { 0.0 };
        *o = (y[i] - prev) / dt;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::OperatorKernel;

    #[test]
    fn resolvent_block_inverts_the_convolution() {
        // (1 - B*) applied to the output of (1 - B*)^{-1} recovers the input.
        let n = 200;
        let dt = 0.01;
        let b = OperatorKernel::exponential(2.0, DMatrix::from_element(1, 1, 0.7)).unwrap();
        let law = MaterialLaw::single(1, BlockKind::Hyp1(b.clone())).unwrap();
        let dl = DiscreteLaw::new(&law, dt, n).unwrap();
        let u: Vec<f64> = (0..n).map(|j| (j as f64 * dt * 3.0).sin()).collect();
        let (w, q) = dl.apply(&u);
        assert!(q.iter().all(|&v| v == 0.0));
        let bw = b.lag_weights(dt, n).apply(&w, 1);
        for j in 0..n {
            assert!((w[j] - bw[j] - u[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn instantaneous_parts_split_by_kind() {
        let law = MaterialLaw::new(vec![("a".into(), 1), ("b".into(), 1)])
            .with_entry("a", "a", BlockKind::Const(DMatrix::from_element(1, 1, 2.0)))
            .unwrap()
            .with_entry("b", "a", BlockKind::ZConst(DMatrix::from_element(1, 1, -0.5)))
            .unwrap();
        let dl = DiscreteLaw::new(&law, 0.1, 4).unwrap();
        assert_eq!(dl.e0_p()[(0, 0)], 2.0);
        assert_eq!(dl.e0_q()[(1, 0)], -0.5);
        assert_eq!(dl.e0_q()[(0, 0)], 0.0);
    }

    #[test]
    fn backward_difference_of_ramp_is_constant() {
        let y: Vec<f64> = (1..=5).map(|j| j as f64 * 0.5).collect();
        let d = backward_difference(&y, 1, 0.5);
        assert!(d.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
