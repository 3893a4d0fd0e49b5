//! Hautus rank tests at the eigenvalues of `E₁`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::linalg::{
    cluster_eigenvalues, cluster_tolerance, complexify, eigenvalues, ensure_square, frobenius,
    min_singular_left, normalize_phase, C64,
};

/// Eigenvalue at which the rank condition fails, with a left (stabilizability)
/// or right (detectability) eigenvector certifying it.
#[derive(Debug, Clone)]
pub struct HautusWitness {
    pub eigenvalue: C64,
    pub vector: DVector<C64>,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct HautusVerdict {
    pub holds: bool,
    /// Smallest singular value of `[λI − E₁, B]` over the tested eigenvalues.
    pub min_margin: f64,
    pub threshold: f64,
    pub witness: Option<HautusWitness>,
}

/// Candidate evaluation points: each eigenvalue cluster's mean and its
/// members, since a perturbed Jordan block is only accurate in the mean.
fn candidates(e1: &DMatrix<f64>) -> Result<Vec<Vec<C64>>> {
    let eigs = eigenvalues(e1)?;
    let tol = cluster_tolerance(e1);
    Ok(cluster_eigenvalues(&eigs, tol)
        .into_iter()
        .map(|cl| {
            let mut pts = vec![cl.center];
            pts.extend(eigs.iter().copied().filter(|z| (z - cl.center).norm() <= tol * cl.multiplicity as f64));
            pts
        })
        .collect())
}

/// Tests `rank [λI − E₁, B] = n₁` for every `λ ∈ σ(E₁)`.
///
/// `tol` is relative to `max(1, ‖E₁‖_F + ‖B‖_F)`.
pub fn hautus_stabilizable(e1: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<HautusVerdict> {
    ensure_square(e1, "E1")?;
    let n = e1.nrows();
    if b.nrows() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "input matrix has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let threshold = tol * (frobenius(e1) + frobenius(b)).max(1.0);
    let e1c = complexify(e1);
    let bc = complexify(b);
    let mut verdict = HautusVerdict {
        holds: true,
        min_margin: f64::INFINITY,
        threshold,
        witness: None,
    };
    for pts in candidates(e1)? {
        for lam in pts {
            let mut pencil = DMatrix::<C64>::zeros(n, n + b.ncols());
            pencil
                .view_mut((0, 0), (n, n))
                .copy_from(&(DMatrix::<C64>::identity(n, n) * lam - &e1c));
            pencil.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
            let (sigma, mut u) = min_singular_left(&pencil);
            if sigma < verdict.min_margin {
                verdict.min_margin = sigma;
                if sigma <= threshold {
                    normalize_phase(&mut u);
                    verdict.holds = false;
                    verdict.witness = Some(HautusWitness {
                        eigenvalue: lam,
                        vector: u,
                        margin: sigma,
                    });
                }
            }
        }
    }
    Ok(verdict)
}

/// Dual test: `rank [λI − E₁; C] = n₁` for every `λ ∈ σ(E₁)`; the witness is
/// a right eigenvector.
pub fn hautus_detectable(c: &DMatrix<f64>, e1: &DMatrix<f64>, tol: f64) -> Result<HautusVerdict> {
    ensure_square(e1, "E1")?;
    if c.ncols() != e1.nrows() {
        return Err(CoreError::DimensionMismatch(format!(
            "output matrix has {} columns, expected {}",
            c.ncols(),
            e1.nrows()
        )));
    }
    let mut v = hautus_stabilizable(&e1.transpose(), &c.transpose(), tol)?;
    if let Some(w) = &mut v.witness {
        // left eigenvector of E₁ᵀ is the conjugate of a right eigenvector of E₁
        w.vector = w.vector.map(|z| z.conj());
        w.eigenvalue = w.eigenvalue.conj();
    }
    Ok(v)
}
