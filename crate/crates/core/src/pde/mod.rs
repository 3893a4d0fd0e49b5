//! Finite-dimensional stand-ins for the infinite-dimensional block: modal
//! and grid truncations paired with closed-form transfer functions.

use std::f64::consts::PI;
use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::linalg::{c64, complexify, frobenius, C64};

pub mod diffusion;
pub mod filter;
pub mod modal;
pub mod operator;
pub mod statespace;
pub mod wave;

pub use diffusion::{dirichlet_diffusion, neumann_diffusion, DirichletTransfer, NeumannStableTransfer};
pub use filter::{augment_input_filter, FilterAugmented};
pub use modal::{Mode, ModalRealization, ModeSource};
pub use operator::Operator;
pub use statespace::StateSpaceRealization;
pub use wave::{wave_pi_kernel, wave_sensor, wave_transfer_eval, WaveBasePlant, WaveGrid, WaveTransfer};

/// Highest derivative order served by the contour fallback.
pub const MAX_FALLBACK_DERIVATIVE: usize = 3;
const CONTOUR_NODES: usize = 64;

/// A transfer function `G(s)` analytic on `Re s > domain_abscissa`.
pub trait TransferOracle: Send + Sync {
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    fn domain_abscissa(&self) -> f64;
    fn eval(&self, s: C64) -> Result<DMatrix<C64>>;

    /// Closed-form derivative, when the oracle has one.
    fn analytic_derivative(&self, _s: C64, _order: usize) -> Option<Result<DMatrix<C64>>> {
        None
    }

    /// `G^{(order)}(s)`.
    fn derivative(&self, s: C64, order: usize) -> Result<DMatrix<C64>> {
        if order == 0 {
            return self.eval(s);
        }
        if let Some(d) = self.analytic_derivative(s, order) {
            return d;
        }
        contour_derivative(self, s, order)
    }
}

/// Cauchy integral over a circle inside the half-plane of analyticity,
/// discretized with the trapezoid rule (spectrally accurate for periodic
/// integrands).
pub fn contour_derivative<T: TransferOracle + ?Sized>(oracle: &T, s: C64, order: usize) -> Result<DMatrix<C64>> {
    let unavailable = |reason: String| CoreError::DerivativeUnavailable {
        order,
        point: s,
        reason,
    };
    if order > MAX_FALLBACK_DERIVATIVE {
        return Err(unavailable(format!(
            "numerical fallback supports orders up to {MAX_FALLBACK_DERIVATIVE}"
        )));
    }
    let gap = s.re - oracle.domain_abscissa();
    let radius = if gap.is_finite() { (0.5 * gap).min(0.5) } else { 0.5 };
    if !(radius > 1e-6) {
        return Err(unavailable(format!(
            "point is within {gap:e} of the domain boundary"
        )));
    }
    let mut acc = DMatrix::<C64>::zeros(oracle.outputs(), oracle.inputs());
    for k in 0..CONTOUR_NODES {
        let theta = 2.0 * PI * k as f64 / CONTOUR_NODES as f64;
        let dir = c64(theta.cos(), theta.sin());
        let g = oracle.eval(s + dir * radius)?;
        acc += g * dir.powu(order as u32).conj();
    }
    let factorial: f64 = (1..=order).map(|x| x as f64).product();
    Ok(acc * c64(factorial / (CONTOUR_NODES as f64 * radius.powi(order as i32)), 0.0))
}

/// Finite state-space triple `(A_N, B_N, C_N)`.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub a: Operator,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl Truncation {
    pub fn new(a: Operator, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.dim();
        if b.nrows() != n || c.ncols() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "truncation of order {n} has B {}x{} and C {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Truncation { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `C (sI − A)^{-1-j} B`, which equals `(−1)^j G^{(j)}(s) / j!`.
    pub fn resolvent_power(&self, s: C64, j: usize) -> Result<DMatrix<C64>> {
        let mut x = complexify(&self.b);
        for _ in 0..=j {
            x = self.a.shifted_solve(s, &x)?;
        }
        Ok(complexify(&self.c) * x)
    }

    pub fn transfer_at(&self, s: C64) -> Result<DMatrix<C64>> {
        self.resolvent_power(s, 0)
    }
}

/// Transfer function of a finite truncation, with exact derivatives.
#[derive(Debug, Clone)]
pub struct TruncationTransfer {
    pub truncation: Truncation,
    pub abscissa: f64,
}

impl TransferOracle for TruncationTransfer {
    fn inputs(&self) -> usize {
        self.truncation.b.ncols()
    }

    fn outputs(&self) -> usize {
        self.truncation.c.nrows()
    }

    fn domain_abscissa(&self) -> f64 {
        self.abscissa
    }

    fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        self.truncation.transfer_at(s)
    }

    fn analytic_derivative(&self, s: C64, order: usize) -> Option<Result<DMatrix<C64>>> {
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let factorial: f64 = (1..=order).map(|x| x as f64).product();
        Some(self.truncation.resolvent_power(s, order).map(|m| m * c64(sign * factorial, 0.0)))
    }
}

/// A PDE block: a truncation for simulation plus the transfer function used
/// for the finite products `ΠB₁` and `C₁Π`.
pub trait Realization: Send + Sync + Debug {
    fn kind(&self) -> &str;
    fn truncation(&self) -> &Truncation;
    /// Preferred transfer function: a closed form when one exists.
    fn transfer(&self) -> &dyn TransferOracle;
    /// Declared growth bound `ω` of the semigroup.
    fn growth_bound(&self) -> f64;

    fn inputs(&self) -> usize {
        self.truncation().b.ncols()
    }

    fn outputs(&self) -> usize {
        self.truncation().c.nrows()
    }

    fn exp_stable(&self) -> bool {
        self.growth_bound() < 0.0
    }

    /// Spatial sample points of grid realizations.
    fn grid(&self) -> Option<&[f64]> {
        None
    }

    /// Solves `(sI − A_N) x = rhs` on the truncated state.
    fn resolvent_apply(&self, s: C64, rhs: &DVector<C64>) -> Result<DVector<C64>> {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        let x = self.truncation().a.shifted_solve(s, &m)?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    /// Transfer function of the truncation itself.
    fn truncation_transfer(&self) -> TruncationTransfer {
        TruncationTransfer {
            truncation: self.truncation().clone(),
            abscissa: self.growth_bound(),
        }
    }
}

/// Result of a finite-difference Cauchy–Riemann check.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticityProbe {
    pub point: C64,
    pub residual: f64,
}

pub const ANALYTICITY_TOLERANCE: f64 = 1e-6;

impl AnalyticityProbe {
    pub fn passed(&self) -> bool {
        self.residual <= ANALYTICITY_TOLERANCE
    }
}

/// Relative size of `∂G/∂x + i ∂G/∂y`, which vanishes for analytic `G`.
pub fn cauchy_riemann_probe(oracle: &dyn TransferOracle, s: C64) -> Result<AnalyticityProbe> {
    let h = 1e-4 * s.norm().max(1.0);
    let dx = (oracle.eval(s + h)? - oracle.eval(s - h)?) / c64(2.0 * h, 0.0);
    let dy = (oracle.eval(s + c64(0.0, h))? - oracle.eval(s - c64(0.0, h))?) / c64(2.0 * h, 0.0);
    let defect = &dx + &dy * c64(0.0, 1.0);
    let scale = (frobenius(&dx) + frobenius(&dy)).max(1e-8 * frobenius(&oracle.eval(s)?)).max(1e-300);
    Ok(AnalyticityProbe {
        point: s,
        residual: frobenius(&defect) / scale,
    })
}

/// `‖G(s̄) − conj(G(s))‖ / ‖G(s)‖`, zero for real systems.
pub fn conjugate_symmetry_defect(oracle: &dyn TransferOracle, s: C64) -> Result<f64> {
    let g = oracle.eval(s)?;
    let gc = oracle.eval(s.conj())?;
    Ok(frobenius(&(gc - g.map(|z| z.conj()))) / frobenius(&g).max(1e-300))
}
