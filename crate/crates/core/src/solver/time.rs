use std::ops::Range;

use nalgebra::{DMatrix, DVector, LU};

use super::discrete::DiscreteLaw;
use super::harness::SolveOperator;
use super::{check_dims, margin_gate, InclusionProblem};
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, lambda_max, lambda_min, op_norm_real, to_complex, RMatrix};
use crate::material_laws::{MaterialLaw, SolvabilityReport};
use crate::monotone::MonotoneRelation;
use crate::operators::BlockOperator;
use crate::tolerances::{INNER_ITERATION, INNER_MAX_ITER, MONOTONE};
use crate::weighted_space::{TimeGrid, WeightedSignal};

#[derive(Debug, Clone)]
pub struct TimeSolution {
    pub solution: WeightedSignal,
    /// Largest relative residual of the per-step system.
    pub max_step_residual: f64,
    /// Total forward-backward iterations over all steps.
    pub inner_iterations: usize,
}

/// The monotone components after eliminating the others by a Schur complement.
struct MonotoneBlock {
    m_idx: Vec<usize>,
    o_idx: Vec<usize>,
    koo: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    kmo: RMatrix,
    /// `Koo^{-1} Kom`.
    z: RMatrix,
    sigma: RMatrix,
    /// `Σ = s I`: a single resolvent evaluation solves the step.
    scalar: Option<f64>,
    tau: f64,
    relations: Vec<(Range<usize>, MonotoneRelation)>,
}

/// Backward-difference stepper for `(U, F) ∈ ∂_0 M(∂_0^{-1}) + A + A_mono`.
///
/// Step `j` solves `K x + a = b_j`, `a ∈ A_mono(x)`, with
/// `K = E0_P/dt + E0_Q + A` and `b_j = F_j - (H^P_j - (P U)_{j-1})/dt - H^Q_j`.
pub struct TimeStepper {
    law: DiscreteLaw,
    grid: TimeGrid,
    nu: f64,
    k: RMatrix,
    k_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    mono: Option<MonotoneBlock>,
    margin: SolvabilityReport,
}

impl std::fmt::Debug for TimeStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeStepper").field("grid", &self.grid).field("nu", &self.nu).finish()
    }
}

impl TimeStepper {
    pub fn new(
        law: &MaterialLaw,
        a: &BlockOperator,
        relations: &[(String, MonotoneRelation)],
        grid: TimeGrid,
        nu: f64,
        force: bool,
    ) -> Result<Self> {
        check_dims(law, a, law.dim())?;
        let margin = margin_gate(law, nu, force)?;
        let dl = DiscreteLaw::new(law, grid.dt, grid.n)?;
        let k = dl.e0_p() / grid.dt + dl.e0_q() + a.matrix();
        let k_lu = k.clone().lu();
        if !k_lu.is_invertible() {
            return Err(Error::Precondition("step matrix is singular".into()));
        }
        let mut rels = Vec::new();
        for (field, rel) in relations {
            let idx = law.field_index(field)?;
            let range = law.field_range(idx);
            if range.len() != rel.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "relation `{}` has dimension {} but field `{field}` has {}",
                    rel.name(),
                    rel.dim(),
                    range.len()
                )));
            }
            if !rel.is_zero() {
                rels.push((range, rel.clone()));
            }
        }
        let mono = if rels.is_empty() { None } else { Some(monotone_block(&k, law.dim(), rels)?) };
        Ok(Self { law: dl, grid, nu, k, k_lu, mono, margin })
    }

    pub fn from_problem(p: &InclusionProblem, force: bool) -> Result<Self> {
        Self::new(&p.law, &p.a, &p.relations, *p.f.grid(), p.nu(), force)
    }

    pub fn margin(&self) -> &SolvabilityReport {
        &self.margin
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn solve_detailed(&self, f: &WeightedSignal) -> Result<TimeSolution> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch("right-hand side is not on the solver grid".into()));
        }
        if f.nu() != self.nu {
            return Err(Error::WeightMismatch { left: f.nu(), right: self.nu });
        }
        let dim = self.law.dim();
        if f.dim() != dim {
            return Err(Error::DimensionMismatch(format!("right-hand side has dimension {}", f.dim())));
        }
        let n = self.grid.n;
        let dt = self.grid.dt;
        let mut st = self.law.state(n);
        let mut out = vec![0.0; n * dim];
        let mut hp = vec![0.0; dim];
        let mut hq = vec![0.0; dim];
        let mut y_prev = vec![0.0; dim];
        let mut b = vec![0.0; dim];
        let mut x_m = self.mono.as_ref().map(|m| vec![0.0; m.m_idx.len()]);
        let mut worst: f64 = 0.0;
        let mut iterations = 0;
        for j in 0..n {
            self.law.begin_step(j, &mut st, &mut hp, &mut hq);
            for i in 0..dim {
                b[i] = f.value(j)[i] - (hp[i] - y_prev[i]) / dt - hq[i];
            }
            let x: Vec<f64> = match (&self.mono, x_m.as_mut()) {
                (Some(mb), Some(xm)) => {
                    let (x, res, it) = mb.step(&b, xm)?;
                    worst = worst.max(res);
                    iterations += it;
                    x
                }
                _ => {
                    let rhs = DVector::from_column_slice(&b);
                    let x = self.k_lu.solve(&rhs).ok_or_else(|| Error::Precondition("step solve failed".into()))?;
                    let scale = rhs.norm().max(f64::MIN_POSITIVE);
                    worst = worst.max((&self.k * &x - &rhs).norm() / scale);
                    x.as_slice().to_vec()
                }
            };
            self.law.end_step(j, &x, &mut st);
            let p0 = self.law.e0_p() * DVector::from_column_slice(&x);
            for i in 0..dim {
                y_prev[i] = p0[i] + hp[i];
            }
            out[j * dim..(j + 1) * dim].copy_from_slice(&x);
        }
        if worst > MONOTONE {
            return Err(Error::Convergence(format!("step residual {worst:.3e} exceeds {MONOTONE:.0e}")));
        }
        Ok(TimeSolution {
            solution: WeightedSignal::new(self.grid, self.nu, dim, out)?,
            max_step_residual: worst,
            inner_iterations: iterations,
        })
    }
}

impl SolveOperator for TimeStepper {
    fn solve(&self, f: &WeightedSignal) -> Result<WeightedSignal> {
        Ok(self.solve_detailed(f)?.solution)
    }
}

fn submatrix(k: &RMatrix, rows: &[usize], cols: &[usize]) -> RMatrix {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| k[(rows[i], cols[j])])
}

fn monotone_block(k: &RMatrix, dim: usize, rels: Vec<(Range<usize>, MonotoneRelation)>) -> Result<MonotoneBlock> {
    let mut in_m = vec![false; dim];
    for (r, _) in &rels {
        for i in r.clone() {
            if in_m[i] {
                return Err(Error::Precondition("monotone relations overlap".into()));
            }
            in_m[i] = true;
        }
    }
    let m_idx: Vec<usize> = (0..dim).filter(|&i| in_m[i]).collect();
    let o_idx: Vec<usize> = (0..dim).filter(|&i| !in_m[i]).collect();
    let local = |i: usize| m_idx.binary_search(&i).unwrap();
    let relations: Vec<(Range<usize>, MonotoneRelation)> =
        rels.into_iter().map(|(r, a)| (local(r.start)..local(r.start) + r.len(), a)).collect();
    let kmm = submatrix(k, &m_idx, &m_idx);
    let (koo, kmo, z, sigma) = if o_idx.is_empty() {
        (None, DMatrix::zeros(m_idx.len(), 0), DMatrix::zeros(0, m_idx.len()), kmm)
    } else {
        let koo = submatrix(k, &o_idx, &o_idx).lu();
        let kom = submatrix(k, &o_idx, &m_idx);
        let kmo = submatrix(k, &m_idx, &o_idx);
        let z = koo.solve(&kom).ok_or_else(|| Error::Precondition("eliminated block is singular".into()))?;
        let sigma = &kmm - &kmo * &z;
        (Some(koo), kmo, z, sigma)
    };
    let m = m_idx.len();
    let s_mean = sigma.trace() / m as f64;
    let scalar = if (&sigma - DMatrix::identity(m, m) * s_mean).amax() <= 1e-14 * s_mean.abs() && s_mean > 0.0 {
        Some(s_mean)
    } else {
        None
    };
    let sym = (&sigma + sigma.transpose()) * 0.5;
    let lmin = lambda_min(&to_complex(&sym));
    if !(lmin > 0.0) {
        return Err(Error::Precondition(format!(
            "reduced step operator is not strongly monotone: λ_min = {lmin:.3e}"
        )));
    }
    let tau = if is_symmetric(&sigma, 1e-12) {
        2.0 / (lmin + lambda_max(&to_complex(&sym)))
    } else {
        lmin / op_norm_real(&sigma).powi(2)
    };
    Ok(MonotoneBlock { m_idx, o_idx, koo, kmo, z, sigma, scalar, tau, relations })
}

impl MonotoneBlock {
    fn resolve(&self, lambda: f64, y: &[f64], x: &mut [f64]) -> Result<()> {
        for (r, a) in &self.relations {
            a.resolve_into(lambda, &y[r.clone()], &mut x[r.clone()])?;
        }
        Ok(())
    }

    /// Forward-backward map `x ↦ J_{τA}(x - τ(Σx - b̃))`.
    fn fb(&self, x: &[f64], bt: &DVector<f64>, out: &mut [f64]) -> Result<()> {
        let sx = &self.sigma * DVector::from_column_slice(x);
        let y: Vec<f64> = (0..x.len()).map(|i| x[i] - self.tau * (sx[i] - bt[i])).collect();
        self.resolve(self.tau, &y, out)
    }

    /// Returns the full state, the relative fixed-point residual and the iteration count.
    fn step(&self, b: &[f64], xm: &mut [f64]) -> Result<(Vec<f64>, f64, usize)> {
        let bm = DVector::from_fn(self.m_idx.len(), |i, _| b[self.m_idx[i]]);
        let (bt, yo) = match &self.koo {
            Some(lu) => {
                let bo = DVector::from_fn(self.o_idx.len(), |i, _| b[self.o_idx[i]]);
                let yo = lu.solve(&bo).ok_or_else(|| Error::Precondition("eliminated solve failed".into()))?;
                (&bm - &self.kmo * &yo, Some(yo))
            }
            None => (bm, None),
        };
        let mut iterations = 0;
        let residual;
        if let Some(s) = self.scalar {
            let y: Vec<f64> = bt.iter().map(|v| v / s).collect();
            self.resolve(1.0 / s, &y, xm)?;
            residual = 0.0;
        } else {
            let mut next = vec![0.0; xm.len()];
            loop {
                self.fb(xm, &bt, &mut next)?;
                iterations += 1;
                let diff = next.iter().zip(xm.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = next.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                xm.copy_from_slice(&next);
                if diff <= INNER_ITERATION * scale {
                    break;
                }
                if iterations >= INNER_MAX_ITER {
                    return Err(Error::Convergence(format!(
                        "forward-backward iteration stalled at {diff:.3e} after {iterations} steps"
                    )));
                }
            }
            self.fb(xm, &bt, &mut next)?;
            let diff = next.iter().zip(xm.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            residual = diff / next.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        }
        let dim = self.m_idx.len() + self.o_idx.len();
        let mut x = vec![0.0; dim];
        for (i, &g) in self.m_idx.iter().enumerate() {
            x[g] = xm[i];
        }
        if let Some(yo) = yo {
            let xo = yo - &self.z * DVector::from_column_slice(xm);
            for (i, &g) in self.o_idx.iter().enumerate() {
                x[g] = xo[i];
            }
        }
        Ok((x, residual, iterations))
    }
}

/// One-shot time-domain solve; `dt` must match the right-hand side's grid.
pub fn solve_inclusion_time(p: &InclusionProblem, dt: f64, force: bool) -> Result<TimeSolution> {
    if (p.f.grid().dt - dt).abs() > 1e-12 * dt {
        return Err(Error::GridMismatch(format!("dt = {dt} but the right-hand side uses {}", p.f.grid().dt)));
    }
    TimeStepper::from_problem(p, force)?.solve_detailed(&p.f)
}
