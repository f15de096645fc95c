//! Right-hand sides for initial value problems and prescribed histories.
//!
//! With the material law split as `∂_0 P + Q`, an initial value `x0` enters as
//! `P(δ ⊗ x0)`: the jump of `U` at `0` seen through the `∂_0`-carrying blocks. A history
//! `h` on `t < 0` enters as `-χ_{t>=0}(∂_0 P h + Q h)`, the influence of the past on the
//! equation for `w = U - h`, which also carries the jump of `h` at `0`.

use nalgebra::DVector;

use super::discrete::{backward_difference, DiscreteLaw};
use crate::error::{Error, Result};
use crate::material_laws::MaterialLaw;
use crate::operators::BlockOperator;
use crate::weighted_space::{TimeGrid, WeightedSignal};

/// `x0` times the single-cell impulse of mass 1 at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSource {
    pub amplitude: Vec<f64>,
}

impl DeltaSource {
    pub fn new(amplitude: Vec<f64>) -> Result<Self> {
        if amplitude.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("initial value must be finite".into()));
        }
        Ok(Self { amplitude })
    }

    /// `1/dt` on the cell starting at `t = 0`, zero elsewhere.
    pub fn to_signal(&self, grid: TimeGrid, nu: f64) -> Result<WeightedSignal> {
        let j0 = zero_index(&grid)?;
        let dim = self.amplitude.len();
        let mut s = WeightedSignal::zeros(grid, nu, dim)?;
        for (v, a) in s.value_mut(j0).iter_mut().zip(&self.amplitude) {
            *v = a / grid.dt;
        }
        Ok(s)
    }
}

fn zero_index(grid: &TimeGrid) -> Result<usize> {
    grid.index_of(0.0)
        .ok_or_else(|| Error::Precondition(format!("t = 0 is not a grid point (t0 = {}, dt = {})", grid.t0, grid.dt)))
}

fn check_causal_source(f: &WeightedSignal) -> Result<()> {
    let j0 = zero_index(f.grid())?;
    if let Some(j) = (0..j0).find(|&j| f.value(j).iter().any(|&v| v != 0.0)) {
        return Err(Error::Precondition(format!("right-hand side is nonzero at t = {} < 0", f.grid().time(j))));
    }
    Ok(())
}

/// `F + P(δ ⊗ x0)`.
pub fn build_ivp_rhs(law: &MaterialLaw, x0: &[f64], f: &WeightedSignal) -> Result<WeightedSignal> {
    if x0.len() != law.dim() || f.dim() != law.dim() {
        return Err(Error::DimensionMismatch(format!(
            "law has dimension {}, x0 {}, right-hand side {}",
            law.dim(),
            x0.len(),
            f.dim()
        )));
    }
    check_causal_source(f)?;
    let grid = *f.grid();
    let delta = DeltaSource::new(x0.to_vec())?.to_signal(grid, f.nu())?;
    let dl = DiscreteLaw::new(law, grid.dt, grid.n)?;
    let (p_delta, _) = dl.apply(delta.data());
    f.add(&WeightedSignal::new(grid, f.nu(), f.dim(), p_delta)?)
}

/// `F - χ_{t>=0}(∂_0 P h + Q h)` for a history `h` vanishing on `t >= 0`.
///
/// Solving with this right-hand side yields `w = χ_{t>=0} U`, and `w + h` solves the
/// original equation on `t >= 0`. For a constant history and no kernels this equals
/// [`build_ivp_rhs`] with `x0 = h(0-)`.
pub fn build_history_rhs(law: &MaterialLaw, history: &WeightedSignal, f: &WeightedSignal) -> Result<WeightedSignal> {
    history.check_compatible(f)?;
    if f.dim() != law.dim() {
        return Err(Error::DimensionMismatch(format!("law has dimension {}, signals {}", law.dim(), f.dim())));
    }
    check_causal_source(f)?;
    let grid = *f.grid();
    let j0 = zero_index(&grid)?;
    for j in j0..grid.n {
        if history.value(j).iter().any(|&v| v != 0.0) {
            return Err(Error::HistoryLeak { t: grid.time(j) });
        }
    }
    let dim = f.dim();
    let dl = DiscreteLaw::new(law, grid.dt, grid.n)?;
    let (ph, qh) = dl.apply(history.data());
    let dph = backward_difference(&ph, dim, grid.dt);
    let mut out = f.clone();
    let data = out.data_mut();
    for i in j0 * dim..grid.n * dim {
        data[i] -= dph[i] + qh[i];
    }
    Ok(out)
}

/// Relative residual of `∂_0 P v + Q v + A v = F` on `t >= 0` for `v = w + h`.
pub fn history_residual(
    law: &MaterialLaw,
    a: &BlockOperator,
    history: &WeightedSignal,
    w: &WeightedSignal,
    f: &WeightedSignal,
) -> Result<f64> {
    let v = w.add(history)?;
    v.check_compatible(f)?;
    let grid = *f.grid();
    let j0 = zero_index(&grid)?;
    let dim = f.dim();
    let dl = DiscreteLaw::new(law, grid.dt, grid.n)?;
    let (pv, qv) = dl.apply(v.data());
    let dpv = backward_difference(&pv, dim, grid.dt);
    let mut r = WeightedSignal::zeros(grid, f.nu(), dim)?;
    for j in j0..grid.n {
        let av = a.matrix() * DVector::from_column_slice(v.value(j));
        let row = r.value_mut(j);
        for i in 0..dim {
            row[i] = dpv[j * dim + i] + qv[j * dim + i] + av[i] - f.value(j)[i];
        }
    }
    let scale = f.norm().max(f64::MIN_POSITIVE);
    Ok(r.norm() / scale)
}
