use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::linalg::{checked_solve, complexify, C64};

/// A finite state matrix that keeps the block structure needed for cheap
/// shifted solves on long modal truncations.
#[derive(Debug, Clone)]
pub enum Operator {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
    /// `[[top, coupling], [0, bottom]]`
    UpperBlock {
        top: Box<Operator>,
        coupling: DMatrix<f64>,
        bottom: Box<Operator>,
    },
    /// `[[top, 0], [coupling, bottom]]`
    LowerBlock {
        top: Box<Operator>,
        coupling: DMatrix<f64>,
        bottom: Box<Operator>,
    },
}

impl Operator {
    pub fn upper(top: Operator, coupling: DMatrix<f64>, bottom: Operator) -> Self {
        debug_assert_eq!(coupling.shape(), (top.dim(), bottom.dim()));
        Operator::UpperBlock {
            top: Box::new(top),
            coupling,
            bottom: Box::new(bottom),
        }
    }

    pub fn lower(top: Operator, coupling: DMatrix<f64>, bottom: Operator) -> Self {
        debug_assert_eq!(coupling.shape(), (bottom.dim(), top.dim()));
        Operator::LowerBlock {
            top: Box::new(top),
            coupling,
            bottom: Box::new(bottom),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Diagonal(d) => d.len(),
            Operator::UpperBlock { top, bottom, .. } | Operator::LowerBlock { top, bottom, .. } => {
                top.dim() + bottom.dim()
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Diagonal(d) => DMatrix::from_diagonal(d),
            Operator::UpperBlock { top, coupling, bottom } => {
                let (n1, n2) = (top.dim(), bottom.dim());
                let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
                m.view_mut((0, 0), (n1, n1)).copy_from(&top.to_dense());
                m.view_mut((0, n1), (n1, n2)).copy_from(coupling);
                m.view_mut((n1, n1), (n2, n2)).copy_from(&bottom.to_dense());
                m
            }
            Operator::LowerBlock { top, coupling, bottom } => {
                let (n1, n2) = (top.dim(), bottom.dim());
                let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
                m.view_mut((0, 0), (n1, n1)).copy_from(&top.to_dense());
                m.view_mut((n1, 0), (n2, n1)).copy_from(coupling);
                m.view_mut((n1, n1), (n2, n2)).copy_from(&bottom.to_dense());
                m
            }
        }
    }

    /// `A x`
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m * x,
            Operator::Diagonal(d) => DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| d[i] * x[(i, j)]),
            Operator::UpperBlock { top, coupling, bottom } => {
                let n1 = top.dim();
                let x1 = x.rows(0, n1).clone_owned();
                let x2 = x.rows(n1, bottom.dim()).clone_owned();
                stack(&(top.apply(&x1) + coupling * &x2), &bottom.apply(&x2))
            }
            Operator::LowerBlock { top, coupling, bottom } => {
                let n1 = top.dim();
                let x1 = x.rows(0, n1).clone_owned();
                let x2 = x.rows(n1, bottom.dim()).clone_owned();
                stack(&top.apply(&x1), &(coupling * &x1 + bottom.apply(&x2)))
            }
        }
    }

    /// `Aᵀ x`
    pub fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m.tr_mul(x),
            Operator::Diagonal(_) => self.apply(x),
            Operator::UpperBlock { top, coupling, bottom } => {
                let n1 = top.dim();
                let x1 = x.rows(0, n1).clone_owned();
                let x2 = x.rows(n1, bottom.dim()).clone_owned();
                stack(&top.apply_transpose(&x1), &(coupling.tr_mul(&x1) + bottom.apply_transpose(&x2)))
            }
            Operator::LowerBlock { top, coupling, bottom } => {
                let n1 = top.dim();
                let x1 = x.rows(0, n1).clone_owned();
                let x2 = x.rows(n1, bottom.dim()).clone_owned();
                stack(&(top.apply_transpose(&x1) + coupling.tr_mul(&x2)), &bottom.apply_transpose(&x2))
            }
        }
    }

    /// Solves `(sI − A) X = rhs`.
    pub fn shifted_solve(&self, s: C64, rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        self.solve_impl(s, rhs, false)
    }

    /// Solves `(sI − A)ᵀ X = rhs` (plain transpose, not adjoint).
    pub fn shifted_solve_transpose(&self, s: C64, rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        self.solve_impl(s, rhs, true)
    }

    fn solve_impl(&self, s: C64, rhs: &DMatrix<C64>, transpose: bool) -> Result<DMatrix<C64>> {
        match self {
            Operator::Dense(m) => {
                let n = m.nrows();
                let mc = if transpose { complexify(&m.transpose()) } else { complexify(m) };
                let shifted = DMatrix::<C64>::identity(n, n) * s - mc;
                checked_solve(&shifted, rhs).ok_or(CoreError::SingularResolvent(s))
            }
            Operator::Diagonal(d) => {
                let mut out = rhs.clone();
                for (i, &di) in d.iter().enumerate() {
                    let gap = s - di;
                    if gap.norm() <= 1e-14 * s.norm().max(di.abs()).max(1.0) {
                        return Err(CoreError::SingularResolvent(s));
                    }
                    out.row_mut(i).iter_mut().for_each(|z| *z /= gap);
                }
                Ok(out)
            }
            Operator::UpperBlock { top, coupling, bottom } | Operator::LowerBlock { top, coupling, bottom } => {
                let upper = matches!(self, Operator::UpperBlock { .. });
                let n1 = top.dim();
                let r1 = rhs.rows(0, n1).clone_owned();
                let r2 = rhs.rows(n1, bottom.dim()).clone_owned();
                let cc = complexify(coupling);
                // Effective structure after optional transposition.
                let (x1, x2) = if upper != transpose {
                    // [[s−T, −K], [0, s−B]] (upper) or its transposed lower twin
                    let x2 = bottom.solve_impl(s, &r2, transpose)?;
                    let k_x2 = if transpose { cc.transpose() * &x2 } else { &cc * &x2 };
                    let x1 = top.solve_impl(s, &(r1 + k_x2), transpose)?;
                    (x1, x2)
                } else {
                    let x1 = top.solve_impl(s, &r1, transpose)?;
                    let k_x1 = if transpose { cc.transpose() * &x1 } else { &cc * &x1 };
                    let x2 = bottom.solve_impl(s, &(r2 + k_x1), transpose)?;
                    (x1, x2)
                };
                let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
                out.rows_mut(0, n1).copy_from(&x1);
                out.rows_mut(n1, bottom.dim()).copy_from(&x2);
                Ok(out)
            }
        }
    }

    /// Spectral abscissa, exploiting block structure.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        match self {
            Operator::Dense(m) => crate::linalg::spectral_abscissa(m),
            Operator::Diagonal(d) => Ok(d.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Operator::UpperBlock { top, bottom, .. } | Operator::LowerBlock { top, bottom, .. } => {
                Ok(top.spectral_abscissa()?.max(bottom.spectral_abscissa()?))
            }
        }
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    crate::linalg::vstack(a, b)
}
