use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::harness::SolveOperator;
use super::{check_dims, margin_gate, LinearProblem};
use crate::error::{Error, Result};
use crate::linalg::to_complex;
use crate::material_laws::{MaterialLaw, SolvabilityReport};
use crate::operators::BlockOperator;
use crate::weighted_space::{fourier_laplace, inverse_fourier_laplace, Spectrum, TimeGrid, WeightedSignal};

#[derive(Debug, Clone)]
pub struct FrequencySolution {
    pub solution: WeightedSignal,
    /// `‖(symbol + A) Û - F̂‖ / ‖F̂‖` over the solved frequencies.
    pub residual: f64,
}

/// Solves `((i xi_k + nu) M + A) Û_k = F̂_k` on every DFT frequency of a fixed grid.
#[derive(Debug, Clone)]
pub struct FrequencySolver {
    law: MaterialLaw,
    a: BlockOperator,
    grid: TimeGrid,
    nu: f64,
    margin: SolvabilityReport,
}

impl FrequencySolver {
    pub fn new(law: &MaterialLaw, a: &BlockOperator, grid: TimeGrid, nu: f64, force: bool) -> Result<Self> {
        check_dims(law, a, law.dim())?;
        let margin = margin_gate(law, nu, force)?;
        Ok(Self { law: law.clone(), a: a.clone(), grid, nu, margin })
    }

    pub fn margin(&self) -> &SolvabilityReport {
        &self.margin
    }

    pub fn solve_detailed(&self, f: &WeightedSignal) -> Result<FrequencySolution> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch("right-hand side is not on the solver grid".into()));
        }
        if f.nu() != self.nu {
            return Err(Error::WeightMismatch { left: f.nu(), right: self.nu });
        }
        if f.dim() != self.law.dim() {
            return Err(Error::DimensionMismatch(format!("right-hand side has dimension {}", f.dim())));
        }
        let spec = fourier_laplace(f)?;
        let n = self.grid.n;
        let dim = f.dim();
        let a = to_complex(self.a.matrix());
        let xis = spec.frequencies().to_vec();
        let solved: Vec<(Vec<Complex64>, f64, f64)> = (0..=n / 2)
            .into_par_iter()
            .map(|k| {
                let xi = xis[k];
                let m = self.law.symbol(xi, self.nu)? + &a;
                let rhs = DVector::from_column_slice(spec.value(k));
                let u = m.clone().lu().solve(&rhs).ok_or(Error::SingularFrequency { xi })?;
                if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::SingularFrequency { xi });
                }
                let r = (&m * &u - &rhs).norm_squared();
                Ok((u.as_slice().to_vec(), r, rhs.norm_squared()))
            })
            .collect::<Result<_>>()?;
        let mut data = vec![Complex64::new(0.0, 0.0); n * dim];
        let (mut r2, mut f2) = (0.0, 0.0);
        for k in 0..n {
            let (src, conj) = if k <= n / 2 { (k, false) } else { (n - k, true) };
            let (u, r, b) = &solved[src];
            r2 += r;
            f2 += b;
            for (d, z) in data[k * dim..(k + 1) * dim].iter_mut().zip(u) {
                *d = if conj { z.conj() } else { *z };
            }
        }
        let u_hat = Spectrum::new(self.grid, self.nu, dim, data)?;
        let solution = inverse_fourier_laplace(&u_hat, &self.grid)?;
        let residual = if f2 > 0.0 { (r2 / f2).sqrt() } else { r2.sqrt() };
        Ok(FrequencySolution { solution, residual })
    }
}

impl SolveOperator for FrequencySolver {
    fn solve(&self, f: &WeightedSignal) -> Result<WeightedSignal> {
        Ok(self.solve_detailed(f)?.solution)
    }
}

/// One-shot frequency solve of a linear problem at the weight of its right-hand side.
pub fn solve_linear_frequency(p: &LinearProblem, force: bool) -> Result<FrequencySolution> {
    FrequencySolver::new(&p.law, &p.a, *p.f.grid(), p.nu(), force)?.solve_detailed(&p.f)
}
