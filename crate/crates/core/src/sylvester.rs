//! Explicit solutions `Π` of the cascade Sylvester equations and the finite
//! products `ΠB₁` (actuator) and `C₁Π` (sensor).

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::linalg::{c64, complexify, frobenius, realify, sylvester_kron, C64};
use crate::lti::{ExpCoefficients, NormalizedPlant, Orientation};
use crate::pde::{Operator, TransferOracle, Truncation};

/// Relative Frobenius residual accepted for a truncated `Π`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Relative imaginary part tolerated before dropping it.
pub const REAL_TOLERANCE: f64 = 1e-9;
/// Largest vectorized system the oracle will build.
pub const KRONECKER_LIMIT: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SylvesterSolution {
    pub orientation: Orientation,
    /// Actuator: `n1 × dim A₁`, acting on `[w₂; z]`. Sensor: `dim A₁ × n1`.
    pub pi: DMatrix<f64>,
    /// `ΠB₁` or `C₁Π` through the transfer function, once computed.
    pub product: Option<DMatrix<f64>>,
    /// Relative residual of the truncated equation.
    pub residual: f64,
    pub exp_coeffs: ExpCoefficients,
}

impl SylvesterSolution {
    /// Sensor case: rows of `Π` acting into `w₂` (`Π₁`) and into the PDE
    /// state (`Π₂`).
    pub fn sensor_blocks(&self, n2: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let rows = self.pi.nrows();
        (
            self.pi.rows(0, n2).clone_owned(),
            self.pi.rows(n2, rows - n2).clone_owned(),
        )
    }

    /// Actuator case: columns of `Π` acting on `w₂` and on the PDE state.
    pub fn actuator_blocks(&self, n2: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let cols = self.pi.ncols();
        (
            self.pi.columns(0, n2).clone_owned(),
            self.pi.columns(n2, cols - n2).clone_owned(),
        )
    }
}

/// `A₁ = [E₂, F₂C; 0, A]` and `C₁ = [0, C]`.
pub fn actuator_system(plant: &NormalizedPlant, pde: &Truncation) -> (Operator, DMatrix<f64>) {
    let n2 = plant.n2();
    let q = pde.c.nrows();
    if n2 == 0 {
        return (pde.a.clone(), pde.c.clone());
    }
    let a1 = Operator::upper(Operator::Dense(plant.e2().clone()), plant.f2() * &pde.c, pde.a.clone());
    let mut c1 = DMatrix::zeros(q, n2 + pde.dim());
    c1.view_mut((0, n2), (q, pde.dim())).copy_from(&pde.c);
    (a1, c1)
}

/// `A₁ = [E₂, 0; BG₂, A]` and `B₁ = [0; B]`.
pub fn sensor_system(plant: &NormalizedPlant, pde: &Truncation) -> (Operator, DMatrix<f64>) {
    let n2 = plant.n2();
    let m = pde.b.ncols();
    if n2 == 0 {
        return (pde.a.clone(), pde.b.clone());
    }
    let a1 = Operator::lower(Operator::Dense(plant.e2().clone()), &pde.b * plant.g2(), pde.a.clone());
    let mut b1 = DMatrix::zeros(n2 + pde.dim(), m);
    b1.view_mut((n2, 0), (pde.dim(), m)).copy_from(&pde.b);
    (a1, b1)
}

fn overlap(lam: C64) -> impl Fn(CoreError) -> CoreError {
    move |e| match e {
        CoreError::SingularResolvent(_) => CoreError::SpectraOverlap(lam),
        other => other,
    }
}

fn check_dims(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(CoreError::DimensionMismatch(format!(
            "{what}: expected {}x{}, got {}x{}",
            want.0, want.1, got.0, got.1
        )));
    }
    Ok(())
}

/// `Π = Σ_k Σ_j E_kj F₁ C₁ (λ_k − A₁)^{−1−j}`, solving `E₁Π = ΠA₁ + F₁C₁`.
pub fn solve_actuator_pi(
    e1: &DMatrix<f64>,
    f1: &DMatrix<f64>,
    a1: &Operator,
    c1: &DMatrix<f64>,
    exp_coeffs: &ExpCoefficients,
) -> Result<SylvesterSolution> {
    let (n1, dim) = (e1.nrows(), a1.dim());
    check_dims("F1", f1.shape(), (n1, c1.nrows()))?;
    check_dims("C1", c1.shape(), (f1.ncols(), dim))?;
    let mut pi = DMatrix::<C64>::zeros(n1, dim);
    let f1c = complexify(f1);
    let c1t = complexify(&c1.transpose());
    for (lam, coeffs) in exp_coeffs.eigenvalues.iter().zip(&exp_coeffs.coefficients) {
        // Yᵀ_j = (λ − A₁)^{−ᵀ(1+j)} C₁ᵀ
        let mut yt = c1t.clone();
        for ekj in coeffs {
            yt = a1.shifted_solve_transpose(*lam, &yt).map_err(overlap(*lam))?;
            pi += ekj * &f1c * yt.transpose();
        }
    }
    let pi = realify(&pi, "Pi", REAL_TOLERANCE)?;
    let residual = actuator_residual(e1, f1, a1, c1, &pi);
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(CoreError::ResidualTooLarge {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(SylvesterSolution {
        orientation: Orientation::Actuator,
        pi,
        product: None,
        residual,
        exp_coeffs: exp_coeffs.clone(),
    })
}

/// Relative residual of `E₁Π − ΠA₁ − F₁C₁`.
pub fn actuator_residual(
    e1: &DMatrix<f64>,
    f1: &DMatrix<f64>,
    a1: &Operator,
    c1: &DMatrix<f64>,
    pi: &DMatrix<f64>,
) -> f64 {
    let e_pi = e1 * pi;
    let pi_a = a1.apply_transpose(&pi.transpose()).transpose();
    let fc = f1 * c1;
    let r = &e_pi - &pi_a - &fc;
    frobenius(&r) / (frobenius(&e_pi) + frobenius(&pi_a) + frobenius(&fc)).max(f64::MIN_POSITIVE)
}

/// `Π = Σ_k Σ_j (λ_k − A₁)^{−1−j} B₁ G₁ E_kj`, solving `ΠE₁ = A₁Π + B₁G₁`.
pub fn solve_sensor_pi(
    e1: &DMatrix<f64>,
    g1: &DMatrix<f64>,
    a1: &Operator,
    b1: &DMatrix<f64>,
    exp_coeffs: &ExpCoefficients,
) -> Result<SylvesterSolution> {
    let (n1, dim) = (e1.nrows(), a1.dim());
    check_dims("G1", g1.shape(), (b1.ncols(), n1))?;
    check_dims("B1", b1.shape(), (dim, g1.nrows()))?;
    let mut pi = DMatrix::<C64>::zeros(dim, n1);
    let g1c = complexify(g1);
    let b1c = complexify(b1);
    for (lam, coeffs) in exp_coeffs.eigenvalues.iter().zip(&exp_coeffs.coefficients) {
        let mut y = b1c.clone();
        for ekj in coeffs {
            y = a1.shifted_solve(*lam, &y).map_err(overlap(*lam))?;
            pi += &y * &g1c * ekj;
        }
    }
    let pi = realify(&pi, "Pi", REAL_TOLERANCE)?;
    let residual = sensor_residual(e1, g1, a1, b1, &pi);
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(CoreError::ResidualTooLarge {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(SylvesterSolution {
        orientation: Orientation::Sensor,
        pi,
        product: None,
        residual,
        exp_coeffs: exp_coeffs.clone(),
    })
}

/// Relative residual of `ΠE₁ − A₁Π − B₁G₁`.
pub fn sensor_residual(
    e1: &DMatrix<f64>,
    g1: &DMatrix<f64>,
    a1: &Operator,
    b1: &DMatrix<f64>,
    pi: &DMatrix<f64>,
) -> f64 {
    let pi_e = pi * e1;
    let a_pi = a1.apply(pi);
    let bg = b1 * g1;
    let r = &pi_e - &a_pi - &bg;
    frobenius(&r) / (frobenius(&pi_e) + frobenius(&a_pi) + frobenius(&bg)).max(f64::MIN_POSITIVE)
}

/// `(−1)^j G^{(j)}(λ)/j!`, which equals `C(λ − A)^{−1−j}B`.
fn resolvent_moment(transfer: &dyn TransferOracle, lam: C64, j: usize) -> Result<DMatrix<C64>> {
    if !(lam.re > transfer.domain_abscissa()) {
        return Err(CoreError::TransferUndefinedAtEigenvalue {
            eigenvalue: lam,
            abscissa: transfer.domain_abscissa(),
        });
    }
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let factorial: f64 = (1..=j).map(|x| x as f64).product();
    Ok(transfer.derivative(lam, j)? * c64(sign / factorial, 0.0))
}

/// `ΠB₁ = Σ_k Σ_j E_kj F₁ (−1)^j G^{(j)}(λ_k)/j!`.
pub fn pi_times_input(
    exp_coeffs: &ExpCoefficients,
    f1: &DMatrix<f64>,
    transfer: &dyn TransferOracle,
) -> Result<DMatrix<f64>> {
    let n1 = exp_coeffs.dim();
    check_dims("F1", f1.shape(), (n1, transfer.outputs()))?;
    let f1c = complexify(f1);
    let mut acc = DMatrix::<C64>::zeros(n1, transfer.inputs());
    for (lam, coeffs) in exp_coeffs.eigenvalues.iter().zip(&exp_coeffs.coefficients) {
        for (j, ekj) in coeffs.iter().enumerate() {
            acc += ekj * &f1c * resolvent_moment(transfer, *lam, j)?;
        }
    }
    realify(&acc, "Pi B1", REAL_TOLERANCE)
}

/// `C₁Π = Σ_k Σ_j (−1)^j G^{(j)}(λ_k)/j! · G₁ E_kj`.
pub fn output_times_pi(
    exp_coeffs: &ExpCoefficients,
    g1: &DMatrix<f64>,
    transfer: &dyn TransferOracle,
) -> Result<DMatrix<f64>> {
    let n1 = exp_coeffs.dim();
    check_dims("G1", g1.shape(), (transfer.inputs(), n1))?;
    let g1c = complexify(g1);
    let mut acc = DMatrix::<C64>::zeros(transfer.outputs(), n1);
    for (lam, coeffs) in exp_coeffs.eigenvalues.iter().zip(&exp_coeffs.coefficients) {
        for (j, ekj) in coeffs.iter().enumerate() {
            acc += resolvent_moment(transfer, *lam, j)? * &g1c * ekj;
        }
    }
    realify(&acc, "C1 Pi", REAL_TOLERANCE)
}

/// Independent solve of `left·X − X·right = rhs` through the vectorized
/// system. Actuator form: `(E₁, A₁, F₁C₁)`. Sensor form: `(A₁, E₁, −B₁G₁)`.
pub fn kronecker_oracle(left: &DMatrix<f64>, right: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let size = left.nrows() * right.nrows();
    if size > KRONECKER_LIMIT {
        return Err(CoreError::DimensionMismatch(format!(
            "vectorized Sylvester system of order {size} exceeds {KRONECKER_LIMIT}"
        )));
    }
    sylvester_kron(left, right, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::exp_coefficients;
    use crate::pde::TruncationTransfer;

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn scalar_actuator() {
        let e1 = scalar(0.0);
        let ec = exp_coefficients(&e1).unwrap();
        let a1 = Operator::Dense(scalar(-1.0));
        let sol = solve_actuator_pi(&e1, &scalar(1.0), &a1, &scalar(1.0), &ec).unwrap();
        assert!((sol.pi[(0, 0)] - 1.0).abs() < 1e-15);
        let t = TruncationTransfer {
            truncation: Truncation::new(a1, scalar(1.0), scalar(1.0)).unwrap(),
            abscissa: -1.0,
        };
        let pb = pi_times_input(&ec, &scalar(1.0), &t).unwrap();
        assert!((pb[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_sensor() {
        let e1 = scalar(0.0);
        let ec = exp_coefficients(&e1).unwrap();
        let a1 = Operator::Dense(scalar(-1.0));
        let sol = solve_sensor_pi(&e1, &scalar(1.0), &a1, &scalar(1.0), &ec).unwrap();
        assert!((sol.pi[(0, 0)] - 1.0).abs() < 1e-15);
        let t = TruncationTransfer {
            truncation: Truncation::new(a1, scalar(1.0), scalar(1.0)).unwrap(),
            abscissa: -1.0,
        };
        assert!((output_times_pi(&ec, &scalar(1.0), &t).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_scalar_and_jordan() {
        let pi = kronecker_oracle(&scalar(0.0), &scalar(-1.0), &scalar(1.0)).unwrap();
        assert!((pi[(0, 0)] - 1.0).abs() < 1e-15);
        let e1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let rhs = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let pi = kronecker_oracle(&e1, &scalar(-1.0), &rhs).unwrap();
        let r = &e1 * &pi - &pi * scalar(-1.0) - &rhs;
        assert!(frobenius(&r) < 1e-14);
        let ec = exp_coefficients(&e1).unwrap();
        let f1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let sol = solve_actuator_pi(&e1, &f1, &Operator::Dense(scalar(-1.0)), &scalar(1.0), &ec).unwrap();
        assert!(frobenius(&(sol.pi - pi)) < 1e-14);
    }

    #[test]
    fn overlapping_spectra_are_reported() {
        let e1 = scalar(0.0);
        let ec = exp_coefficients(&e1).unwrap();
        let a1 = Operator::Diagonal(nalgebra::DVector::from_element(1, 0.0));
        let err = solve_actuator_pi(&e1, &scalar(1.0), &a1, &scalar(1.0), &ec).unwrap_err();
        assert!(matches!(err, CoreError::SpectraOverlap(_)));
        assert!(matches!(
            kronecker_oracle(&e1, &scalar(0.0), &scalar(1.0)),
            Err(CoreError::SingularSystem)
        ));
    }
}
