//! Stabilizing and injection gains from a shifted Riccati equation.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::linalg::{eigenvalues, ensure_square, spectral_abscissa};
use crate::lti::hautus::hautus_stabilizable;
use crate::lti::schur::ordered_schur;

/// Relative tolerance of the stabilizability pre-check.
const HAUTUS_TOL: f64 = 1e-10;

/// Stabilizing solution of `AᵀP + PA − PBBᵀP + I = 0` via the ordered
/// Schur form of the Hamiltonian.
pub fn care(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut ham = DMatrix::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-(b * b.transpose())));
    ham.view_mut((n, 0), (n, n)).fill_with_identity();
    ham.view_mut((n, 0), (n, n)).neg_mut();
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let os = ordered_schur(&ham, |z| z.re < 0.0)?;
    if os.selected != n {
        return Err(CoreError::RiccatiFailure(format!(
            "Hamiltonian has {} stable eigenvalues, expected {n}",
            os.selected
        )));
    }
    let u1 = os.q.view((0, 0), (n, n)).clone_owned();
    let u2 = os.q.view((n, 0), (n, n)).clone_owned();
    // P = U₂U₁⁻¹, i.e. U₁ᵀPᵀ = U₂ᵀ
    let pt = crate::linalg::checked_solve(&u1.transpose(), &u2.transpose())
        .ok_or_else(|| CoreError::RiccatiFailure("stable invariant subspace is not a graph".into()))?;
    let p = pt.transpose();
    Ok((&p + p.transpose()) * 0.5)
}

/// Returns `K` with every eigenvalue of `E₁ + B̂K` at real part `≤ −margin`.
///
/// The Riccati equation is solved for `(E₁ + margin·I, B̂)` with unit weights
/// and `K = −B̂ᵀP`.
pub fn place_stabilizing_gain(e1: &DMatrix<f64>, bhat: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
    ensure_square(e1, "E1")?;
    let n = e1.nrows();
    if bhat.nrows() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "input matrix has {} rows, expected {n}",
            bhat.nrows()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(bhat.ncols(), 0));
    }
    let verdict = hautus_stabilizable(e1, bhat, HAUTUS_TOL)?;
    if let Some(w) = verdict.witness {
        if w.eigenvalue.re >= 0.0 {
            return Err(CoreError::NotStabilizable { eigenvalue: w.eigenvalue });
        }
        if w.eigenvalue.re > -margin {
            return Err(CoreError::MarginUnreachable {
                requested: margin,
                achieved: -w.eigenvalue.re,
            });
        }
    }
    let shifted = e1 + DMatrix::identity(n, n) * margin;
    let p = care(&shifted, bhat)?;
    let k = -(bhat.transpose() * p);
    if k.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::RiccatiFailure("gain is not finite".into()));
    }
    let achieved = -spectral_abscissa(&(e1 + bhat * &k))?;
    if achieved < margin * (1.0 - 1e-9) - 1e-12 {
        return Err(CoreError::MarginUnreachable {
            requested: margin,
            achieved,
        });
    }
    Ok(k)
}

/// Returns `L` with `E₁ + L G₁` Hurwitz (margin as above), by duality.
pub fn place_injection_gain(g1: &DMatrix<f64>, e1: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
    ensure_square(e1, "E1")?;
    if g1.ncols() != e1.nrows() {
        return Err(CoreError::DimensionMismatch(format!(
            "output matrix has {} columns, expected {}",
            g1.ncols(),
            e1.nrows()
        )));
    }
    match place_stabilizing_gain(&e1.transpose(), &g1.transpose(), margin) {
        Ok(k) => Ok(k.transpose()),
        Err(CoreError::NotStabilizable { eigenvalue }) => Err(CoreError::NotDetectable { eigenvalue }),
        Err(e) => Err(e),
    }
}

/// Certifies that `m` is Hurwitz and returns its spectral abscissa.
pub fn verify_hurwitz(m: &DMatrix<f64>) -> Result<f64> {
    let abscissa = spectral_abscissa(m)?;
    if abscissa < 0.0 {
        Ok(abscissa)
    } else {
        Err(CoreError::Unstable { abscissa })
    }
}

/// Sorted eigenvalues of `E₁ + B̂K`, handy for reports.
pub fn closed_loop_eigenvalues(e1: &DMatrix<f64>, bhat: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<Vec<crate::linalg::C64>> {
    eigenvalues(&(e1 + bhat * k))
}
