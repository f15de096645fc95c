//! Residuals of the reduced second-order and parabolic equations, evaluated with a
//! discretization independent of the stepper: central differences in time and the
//! trapezoid rule for convolutions and antiderivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{KernelForm, OperatorKernel};
use crate::linalg::RMatrix;
use crate::weighted_space::WeightedSignal;

/// Central difference, zero state before the first sample, backward difference at the end.
pub fn central_derivative(x: &WeightedSignal) -> WeightedSignal {
    let (n, dim, dt) = (x.len(), x.dim(), x.grid().dt);
    let mut out = x.scale(0.0);
    for j in 0..n {
        for c in 0..dim {
            let prev = if j > 0 { x.value(j - 1)[c] } else { 0.0 };
            out.value_mut(j)[c] = if j + 1 < n {
                (x.value(j + 1)[c] - prev) / (2.0 * dt)
            } else {
                (x.value(j)[c] - prev) / dt
            };
        }
    }
    out
}

/// `(x_{j+1} - 2 x_j + x_{j-1}) / dt²`, zero state before the first sample; the last
/// sample repeats its neighbour.
pub fn second_difference(x: &WeightedSignal) -> WeightedSignal {
    let (n, dim, dt) = (x.len(), x.dim(), x.grid().dt);
    let mut out = x.scale(0.0);
    for j in 0..n.saturating_sub(1) {
        for c in 0..dim {
            let prev = if j > 0 { x.value(j - 1)[c] } else { 0.0 };
            out.value_mut(j)[c] = (x.value(j + 1)[c] - 2.0 * x.value(j)[c] + prev) / (dt * dt);
        }
    }
    if n >= 2 {
        let last = out.value(n - 2).to_vec();
        out.value_mut(n - 1).copy_from_slice(&last);
    }
    out
}

/// `∫_{t0}^{t_j} x` by the trapezoid rule.
pub fn trapezoid_antiderivative(x: &WeightedSignal) -> WeightedSignal {
    let (n, dim, dt) = (x.len(), x.dim(), x.grid().dt);
    let mut out = x.scale(0.0);
    for j in 1..n {
        for c in 0..dim {
            out.value_mut(j)[c] = out.value(j - 1)[c] + 0.5 * dt * (x.value(j - 1)[c] + x.value(j)[c]);
        }
    }
    out
}

/// `(B * x)(t_j) = ∫_{t0}^{t_j} B(t_j - s) x(s) ds` by the trapezoid rule on the samples.
pub fn trapezoid_convolve(b: &OperatorKernel, x: &WeightedSignal) -> Result<WeightedSignal> {
    if b.dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!("kernel dimension {} vs signal {}", b.dim(), x.dim())));
    }
    let (n, dim, dt) = (x.len(), x.dim(), x.grid().dt);
    // Separable terms keep the sum scalar; sampled kernels fall back to matrix samples.
    let terms: Vec<(Vec<f64>, RMatrix)> = match b.form() {
        KernelForm::Separable(terms) => terms
            .iter()
            .map(|t| ((0..n).map(|l| t.profile.eval(l as f64 * dt)).collect(), t.matrix.clone()))
            .collect(),
        KernelForm::Sampled { .. } => {
            return trapezoid_convolve_dense(b, x);
        }
    };
    let mut out = x.scale(0.0);
    let mut acc = vec![0.0; dim];
    for j in 1..n {
        for (g, m) in &terms {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for k in 0..=j {
                let w = if k == 0 || k == j { 0.5 * dt } else { dt } * g[j - k];
                if w == 0.0 {
                    continue;
                }
                for (a, v) in acc.iter_mut().zip(x.value(k)) {
                    *a += w * v;
                }
            }
            let y = m * DVector::from_column_slice(&acc);
            for (o, v) in out.value_mut(j).iter_mut().zip(y.iter()) {
                *o += v;
            }
        }
    }
    Ok(out)
}

fn trapezoid_convolve_dense(b: &OperatorKernel, x: &WeightedSignal) -> Result<WeightedSignal> {
    let (n, dt) = (x.len(), x.grid().dt);
    let samples: Vec<RMatrix> = (0..n).map(|l| b.eval(l as f64 * dt)).collect();
    let mut out = x.scale(0.0);
    for j in 1..n {
        let mut acc = DVector::zeros(x.dim());
        for k in 0..=j {
            let w = if k == 0 || k == j { 0.5 * dt } else { dt };
            acc += &samples[j - k] * DVector::from_column_slice(x.value(k)) * w;
        }
        out.value_mut(j).copy_from_slice(acc.as_slice());
    }
    Ok(out)
}

fn apply_matrix(m: &RMatrix, x: &WeightedSignal) -> Result<WeightedSignal> {
    let mut data = Vec::with_capacity(x.len() * m.nrows());
    for row in x.rows() {
        data.extend((m * DVector::from_column_slice(row)).iter());
    }
    WeightedSignal::new(*x.grid(), x.nu(), m.nrows(), data)
}

fn relative(r: &WeightedSignal, f: &WeightedSignal) -> f64 {
    r.norm() / f.norm().max(f64::MIN_POSITIVE)
}

/// Relative residual of `∂_0²(1 + C*) u + G^T (1 - B*) G u = f` with `u = ∂_0^{-1} v`.
pub fn hyperbolic_residual(
    c: &OperatorKernel,
    b: &OperatorKernel,
    g: &DMatrix<f64>,
    v: &WeightedSignal,
    f: &WeightedSignal,
) -> Result<f64> {
    let u = trapezoid_antiderivative(v);
    let cu = u.add(&trapezoid_convolve(c, &u)?)?;
    let gu = apply_matrix(g, &u)?;
    let flux = gu.sub(&trapezoid_convolve(b, &gu)?)?;
    let r = second_difference(&cu).add(&apply_matrix(&g.transpose(), &flux)?)?.sub(f)?;
    Ok(relative(&r, f))
}

/// Relative residual of `∂_0 u + C * ∂_0 u + G^T G u - G^T (B * G u) = f`.
pub fn parabolic_residual(
    c: &OperatorKernel,
    b: &OperatorKernel,
    g: &DMatrix<f64>,
    u: &WeightedSignal,
    f: &WeightedSignal,
) -> Result<f64> {
    let du = central_derivative(u);
    let gu = apply_matrix(g, u)?;
    let flux = gu.sub(&trapezoid_convolve(b, &gu)?)?;
    let r = du
        .add(&trapezoid_convolve(c, &du)?)?
        .add(&apply_matrix(&g.transpose(), &flux)?)?
        .sub(f)?;
    Ok(relative(&r, f))
}
