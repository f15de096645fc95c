//! 1D staggered-grid operators with homogeneous Dirichlet conditions and the block
//! operators built from them.
//!
//! Displacement-like fields live on the `cells - 1` interior nodes `x_i = i h`; fluxes
//! and stresses live on the `cells` cells. The gradient maps nodes to cells.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{lambda_min, op_norm_real, spd_sqrt, to_complex, RMatrix};
use crate::tolerances::STRUCTURAL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// `A* = -A`.
    Skew,
    /// `A* = A` and `A >= 0`.
    SymmetricPositive,
    General,
}

/// Field name and width of one block.
pub type Layout = Vec<(String, usize)>;

#[derive(Debug, Clone)]
pub struct BlockOperator {
    matrix: RMatrix,
    structure: Structure,
    layout: Layout,
}

impl BlockOperator {
    /// Verifies `structure` before accepting the matrix.
    pub fn new(matrix: RMatrix, structure: Structure, layout: Layout) -> Result<Self> {
        let n: usize = layout.iter().map(|(_, d)| d).sum();
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "operator is {:?} but the layout has total width {n}",
                matrix.shape()
            )));
        }
        let scale = op_norm_real(&matrix);
        match structure {
            Structure::Skew => {
                let defect = op_norm_real(&(&matrix + matrix.transpose()));
                if defect > STRUCTURAL * scale {
                    return Err(Error::Precondition(format!("operator is not skew: ‖A + A*‖ = {defect:.3e}")));
                }
            }
            Structure::SymmetricPositive => {
                let defect = op_norm_real(&(&matrix - matrix.transpose()));
                if defect > STRUCTURAL * scale {
                    return Err(Error::Precondition(format!("operator is not symmetric: ‖A - A*‖ = {defect:.3e}")));
                }
                let lmin = lambda_min(&to_complex(&matrix));
                if lmin < -STRUCTURAL * scale {
                    return Err(Error::Precondition(format!("operator is not positive: λ_min = {lmin:.3e}")));
                }
            }
            Structure::General => {}
        }
        Ok(Self { matrix, structure, layout })
    }

    pub fn zero(layout: Layout) -> Self {
        let n = layout.iter().map(|(_, d)| d).sum();
        Self { matrix: DMatrix::zeros(n, n), structure: Structure::Skew, layout }
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Index range of the named block.
    pub fn block_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for (n, d) in &self.layout {
            if n == name {
                return Some(start..start + d);
            }
            start += d;
        }
        None
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.matrix * nalgebra::DVector::from_column_slice(x);
        v.as_slice().to_vec()
    }

    /// `⟨A x, x⟩`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Forward-difference gradient from interior nodes to cells and `div = -G^T`.
///
/// `G` is `cells × (cells - 1)` with `(G u)_j = (u_{j+1} - u_j)/h` and `u_0 = u_cells = 0`.
pub fn build_grad_dirichlet_1d(cells: usize, h: f64) -> Result<(RMatrix, RMatrix)> {
    if cells < 2 || !(h > 0.0) {
        return Err(Error::Precondition(format!("need cells >= 2 and h > 0, got cells = {cells}, h = {h}")));
    }
    let mut g = DMatrix::zeros(cells, cells - 1);
    for j in 0..cells {
        if j < cells - 1 {
            g[(j, j)] = 1.0 / h;
        }
        if j >= 1 {
            g[(j, j - 1)] = -1.0 / h;
        }
    }
    let div = -g.transpose();
    Ok((g, div))
}

/// `[[0, G^T], [-G, 0]]` on the layout `(nodes, cells)`.
pub fn assemble_block_skew(g: &RMatrix, layout: Layout) -> Result<BlockOperator> {
    if layout.len() != 2 || layout[0].1 != g.ncols() || layout[1].1 != g.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "G is {:?} but the layout is {:?}",
            g.shape(),
            layout
        )));
    }
    let (n, m) = (g.ncols(), g.nrows());
    let mut a = DMatrix::zeros(n + m, n + m);
    a.view_mut((0, n), (n, m)).copy_from(&g.transpose());
    a.view_mut((n, 0), (m, n)).copy_from(&(-g));
    BlockOperator::new(a, Structure::Skew, layout)
}

/// `[[0, 0, div], [0, 0, 0], [grad, 0, 0]]` on `(theta, chi, q)` with `div = -G^T`.
pub fn assemble_phase_skew(g: &RMatrix, layout: Layout) -> Result<BlockOperator> {
    if layout.len() != 3 || layout[0].1 != g.ncols() || layout[2].1 != g.nrows() {
        return Err(Error::DimensionMismatch(format!("G is {:?} but the layout is {:?}", g.shape(), layout)));
    }
    let (n, c, m) = (layout[0].1, layout[1].1, layout[2].1);
    let total = n + c + m;
    let mut a = DMatrix::zeros(total, total);
    a.view_mut((0, n + c), (n, m)).copy_from(&(-g.transpose()));
    a.view_mut((n + c, 0), (m, n)).copy_from(g);
    BlockOperator::new(a, Structure::Skew, layout)
}

#[derive(Debug, Clone)]
pub struct Elasticity {
    pub rho: RMatrix,
    pub c: RMatrix,
    pub c_sqrt: RMatrix,
    pub c_inv_sqrt: RMatrix,
    pub a: BlockOperator,
}

/// Mass, stiffness factors and the skew operator of the `(v, T)` system.
///
/// `rho` holds one density per interior node, `c` is the SPD stiffness acting on cell
/// stresses (diagonal in the usual 1D setting).
pub fn build_elasticity_1d(cells: usize, h: f64, rho: &[f64], c: &RMatrix) -> Result<Elasticity> {
    if rho.len() != cells - 1 {
        return Err(Error::DimensionMismatch(format!("rho needs {} nodal values, got {}", cells - 1, rho.len())));
    }
    if let Some(bad) = rho.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::Precondition(format!("density must be positive, got {bad}")));
    }
    if c.shape() != (cells, cells) {
        return Err(Error::DimensionMismatch(format!("C must be {cells}x{cells}, got {:?}", c.shape())));
    }
    let (c_sqrt, c_inv_sqrt) =
        spd_sqrt(c).ok_or_else(|| Error::Precondition("stiffness C is not positive definite".into()))?;
    let (g, _) = build_grad_dirichlet_1d(cells, h)?;
    let a = assemble_block_skew(&g, vec![("v".into(), cells - 1), ("T".into(), cells)])?;
    Ok(Elasticity {
        rho: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(rho)),
        c: c.clone(),
        c_sqrt,
        c_inv_sqrt,
        a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;

    #[test]
    fn four_cell_stencil_on_constant() {
        let h = 0.25;
        let (g, _) = build_grad_dirichlet_1d(4, h).unwrap();
        let u = nalgebra::DVector::from_element(3, 1.0);
        let gu = &g * u;
        assert_eq!(gu.as_slice(), &[4.0, 0.0, 0.0, -4.0]);
    }

    #[test]
    fn linear_profile_has_unit_interior_gradient() {
        let cells = 8;
        let h = 1.0 / cells as f64;
        let (g, _) = build_grad_dirichlet_1d(cells, h).unwrap();
        let u = nalgebra::DVector::from_fn(cells - 1, |i, _| (i + 1) as f64 * h);
        let gu = &g * u;
        for j in 0..cells - 1 {
            assert!((gu[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(build_grad_dirichlet_1d(1, 0.1).is_err());
        assert!(build_grad_dirichlet_1d(4, 0.0).is_err());
    }

    #[test]
    fn zero_gradient_assembles_zero_skew() {
        let g = DMatrix::zeros(4, 3);
        let a = assemble_block_skew(&g, vec![("u".into(), 3), ("q".into(), 4)]).unwrap();
        assert_eq!(a.matrix().amax(), 0.0);
        assert!(assemble_block_skew(&g, vec![("u".into(), 4), ("q".into(), 4)]).is_err());
    }

    #[test]
    fn assembled_skew_has_imaginary_spectrum() {
        let (g, _) = build_grad_dirichlet_1d(4, 0.25).unwrap();
        let a = assemble_block_skew(&g, vec![("u".into(), 3), ("q".into(), 4)]).unwrap();
        assert_eq!(a.dim(), 7);
        assert_eq!((a.matrix() + a.matrix().transpose()).amax(), 0.0);
        let ev = a.matrix().complex_eigenvalues();
        assert!(ev.iter().all(|z| z.re.abs() < 1e-12));
        // i A is Hermitian with the same spectrum up to rotation.
        let ia = to_complex(a.matrix()) * num_complex::Complex64::new(0.0, 1.0);
        assert_eq!(hermitian_eigenvalues(&ia).len(), 7);
    }

    #[test]
    fn structure_tag_is_verified() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let layout = vec![("x".to_string(), 2)];
        assert!(BlockOperator::new(m.clone(), Structure::Skew, layout.clone()).is_err());
        assert!(BlockOperator::new(m, Structure::SymmetricPositive, layout.clone()).is_err());
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(BlockOperator::new(p, Structure::SymmetricPositive, layout).is_ok());
    }

    #[test]
    fn phase_operator_is_skew() {
        let (g, _) = build_grad_dirichlet_1d(5, 0.2).unwrap();
        let a = assemble_phase_skew(&g, vec![("theta".into(), 4), ("chi".into(), 4), ("q".into(), 5)]).unwrap();
        assert_eq!(a.structure(), Structure::Skew);
        assert_eq!(a.block_range("q"), Some(8..13));
    }

    #[test]
    fn unit_elasticity_is_wave_block() {
        let cells = 6;
        let e = build_elasticity_1d(cells, 1.0 / 6.0, &[1.0; 5], &DMatrix::identity(6, 6)).unwrap();
        let (g, _) = build_grad_dirichlet_1d(cells, 1.0 / 6.0).unwrap();
        let w = assemble_block_skew(&g, vec![("v".into(), 5), ("T".into(), 6)]).unwrap();
        assert_eq!(e.a.matrix(), w.matrix());
        assert!((&e.c_sqrt - DMatrix::<f64>::identity(6, 6)).amax() < 1e-14);
        assert!(build_elasticity_1d(cells, 1.0 / 6.0, &[0.0; 5], &DMatrix::identity(6, 6)).is_err());
        assert!(build_elasticity_1d(cells, 1.0 / 6.0, &[1.0; 5], &(-DMatrix::<f64>::identity(6, 6))).is_err());
    }
}
