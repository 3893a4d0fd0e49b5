//! Coefficients of the expansion `e^{-E₁t} = Σ_k Σ_j E_kj e^{-λ_k t} t^j / j!`.

use nalgebra::{DMatrix, SVD};

use crate::error::{CoreError, Result};
use crate::linalg::{
    c64, checked_solve, cluster_eigenvalues, cluster_tolerance, complexify, eigenvalues,
    ensure_square, frobenius, null_space, EigenCluster, C64,
};

/// Eigenvector matrices with a larger condition number are treated as
/// numerically defective.
const MAX_EIGVEC_CONDITION: f64 = 1e8;

/// Acceptance level for the projector sum and the chain recurrence.
const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ExpCoefficients {
    /// Distinct eigenvalues `λ_k`.
    pub eigenvalues: Vec<C64>,
    /// `coefficients[k][j] = E_kj`, with `j` running up to the Jordan index.
    pub coefficients: Vec<Vec<DMatrix<C64>>>,
    dim: usize,
}

impl ExpCoefficients {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct eigenvalues.
    pub fn distinct(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest `j` with a stored `E_kj`.
    pub fn jordan_index(&self, k: usize) -> usize {
        self.coefficients[k].len() - 1
    }

    pub fn max_jordan_index(&self) -> usize {
        (0..self.distinct()).map(|k| self.jordan_index(k)).max().unwrap_or(0)
    }

    /// Evaluates the expansion at time `t` (real part).
    pub fn exp_neg(&self, t: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (lam, coeffs) in self.eigenvalues.iter().zip(&self.coefficients) {
            let decay = (-lam * t).exp();
            let mut weight = c64(1.0, 0.0);
            for (j, ekj) in coeffs.iter().enumerate() {
                if j > 0 {
                    weight *= t / j as f64;
                }
                acc += ekj * (decay * weight);
            }
        }
        acc.map(|z| z.re)
    }

    /// `‖Σ_k E_k0 − I‖_F`.
    pub fn identity_defect(&self) -> f64 {
        let mut sum = DMatrix::<C64>::zeros(self.dim, self.dim);
        for coeffs in &self.coefficients {
            sum += &coeffs[0];
        }
        frobenius(&(sum - DMatrix::identity(self.dim, self.dim)))
    }

    /// Largest relative defect of `E₁E_kj = λ_k E_kj − E_{k,j+1}`.
    pub fn recurrence_defect(&self, e1: &DMatrix<f64>) -> f64 {
        let e1c = complexify(e1);
        let scale = frobenius(e1).max(1.0);
        let mut worst: f64 = 0.0;
        for (lam, coeffs) in self.eigenvalues.iter().zip(&self.coefficients) {
            for (j, ekj) in coeffs.iter().enumerate() {
                let mut lhs = &e1c * ekj - ekj * *lam;
                if let Some(next) = coeffs.get(j + 1) {
                    lhs += next;
                }
                worst = worst.max(frobenius(&lhs) / scale);
            }
        }
        worst
    }
}

/// Computes the exponential coefficients of `E₁`.
///
/// Diagonalizable input goes through an eigenvector basis; otherwise the
/// spectral components are obtained by confluent (Hermite) interpolation,
/// `P_k = p_k(E₁)`, and `E_kj = (λ_k − E₁)^j P_k`.
pub fn exp_coefficients(e1: &DMatrix<f64>) -> Result<ExpCoefficients> {
    ensure_square(e1, "E1")?;
    let n = e1.nrows();
    if n == 0 {
        return Ok(ExpCoefficients {
            eigenvalues: Vec::new(),
            coefficients: Vec::new(),
            dim: 0,
        });
    }
    // A perturbed Jordan block of size m scatters its eigenvalues over a
    // radius ~eps^(1/m), so the grouping radius is widened until the
    // coefficients satisfy both identities.
    let base = cluster_tolerance(e1);
    let eigs = eigenvalues(e1)?;
    let mut last_err = None;
    for widen in [1.0, 10.0, 100.0, 1000.0] {
        let tol = base * widen;
        let mut clusters = cluster_eigenvalues(&eigs, tol);
        for cl in &mut clusters {
            if cl.center.im.abs() <= tol {
                cl.center.im = 0.0;
            }
        }
        let finish = |coefficients| {
            let mut out = ExpCoefficients {
                eigenvalues: clusters.iter().map(|c| c.center).collect(),
                coefficients,
                dim: n,
            };
            enforce_conjugate_pairs(&mut out, tol);
            let defect = out.identity_defect();
            if !(defect <= IDENTITY_TOL) {
                return Err(CoreError::EigDecompositionFailure(format!(
                    "spectral projectors do not sum to the identity (defect {defect:e})"
                )));
            }
            let rec = out.recurrence_defect(e1);
            if !(rec <= IDENTITY_TOL) {
                return Err(CoreError::EigDecompositionFailure(format!(
                    "Jordan chain extraction did not converge (recurrence defect {rec:e})"
                )));
            }
            Ok(out)
        };
        if let Some(Ok(out)) = eigenvector_route(e1, &clusters).map(finish) {
            return Ok(out);
        }
        match hermite_route(e1, &clusters).and_then(finish) {
            Ok(out) => return Ok(out),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn eigenvector_route(e1: &DMatrix<f64>, clusters: &[EigenCluster]) -> Option<Vec<Vec<DMatrix<C64>>>> {
    let n = e1.nrows();
    let e1c = complexify(e1);
    let scale = frobenius(e1).max(1.0);
    let mut v = DMatrix::<C64>::zeros(n, n);
    let mut col = 0;
    for cl in clusters {
        let shifted = DMatrix::<C64>::identity(n, n) * cl.center - &e1c;
        let basis = null_space(&shifted, 0.0, cl.multiplicity);
        if frobenius(&(&shifted * &basis)) > 1e-9 * scale {
            return None;
        }
        v.columns_mut(col, cl.multiplicity).copy_from(&basis);
        col += cl.multiplicity;
    }
    let sv = SVD::new(v.clone(), false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0 && smax / smin < MAX_EIGVEC_CONDITION) {
        return None;
    }
    let w = checked_solve(&v, &DMatrix::identity(n, n))?;
    let mut out = Vec::with_capacity(clusters.len());
    let mut col = 0;
    for cl in clusters {
        let m = cl.multiplicity;
        out.push(vec![v.columns(col, m) * w.rows(col, m)]);
        col += m;
    }
    Some(out)
}

fn hermite_route(e1: &DMatrix<f64>, clusters: &[EigenCluster]) -> Result<Vec<Vec<DMatrix<C64>>>> {
    let n = e1.nrows();
    let e1c = complexify(e1);
    let eye = DMatrix::<C64>::identity(n, n);
    // Interpolate in a centred, scaled variable to keep the confluent
    // Vandermonde matrix well conditioned.
    let center = clusters.iter().map(|c| c.center * c.multiplicity as f64).sum::<C64>() / n as f64;
    let radius = clusters
        .iter()
        .map(|c| (c.center - center).norm())
        .fold(1.0, f64::max);
    let z = (&e1c - &eye * center) / c64(radius, 0.0);
    let nodes: Vec<C64> = clusters.iter().map(|c| (c.center - center) / radius).collect();

    let mut vander = DMatrix::<C64>::zeros(n, n);
    let mut row = 0;
    let mut first_row = Vec::with_capacity(clusters.len());
    for (cl, &nu) in clusters.iter().zip(&nodes) {
        first_row.push(row);
        for i in 0..cl.multiplicity {
            for d in i..n {
                // i-th derivative of ν^d
                let falling: f64 = ((d - i + 1)..=d).map(|x| x as f64).product();
                vander[(row, d)] = nu.powu((d - i) as u32) * falling;
            }
            row += 1;
        }
    }
    let mut rhs = DMatrix::<C64>::zeros(n, clusters.len());
    for (k, &r) in first_row.iter().enumerate() {
        rhs[(r, k)] = c64(1.0, 0.0);
    }
    let poly = checked_solve(&vander, &rhs).ok_or_else(|| {
        CoreError::EigDecompositionFailure("confluent Vandermonde system is singular".into())
    })?;

    let mut powers = Vec::with_capacity(n);
    powers.push(eye.clone());
    for d in 1..n {
        let next = &powers[d - 1] * &z;
        powers.push(next);
    }

    let mut out = Vec::with_capacity(clusters.len());
    for (k, cl) in clusters.iter().enumerate() {
        let mut p = DMatrix::<C64>::zeros(n, n);
        for d in 0..n {
            p += &powers[d] * poly[(d, k)];
        }
        let nil = &eye * cl.center - &e1c;
        let mut chain = vec![p];
        for _ in 1..cl.multiplicity {
            let next = &nil * chain.last().expect("nonempty");
            chain.push(next);
        }
        let p_norm = frobenius(&chain[0]).max(1.0);
        let scale = frobenius(e1).max(1.0);
        while chain.len() > 1 {
            let j = chain.len() - 1;
            if frobenius(&chain[j]) <= 1e-12 * p_norm * scale.powi(j as i32) {
                chain.pop();
            } else {
                break;
            }
        }
        out.push(chain);
    }
    Ok(out)
}

/// Real `E₁` has conjugate coefficients for conjugate eigenvalues; copy them
/// across so the symmetry holds exactly.
fn enforce_conjugate_pairs(ec: &mut ExpCoefficients, tol: f64) {
    let count = ec.eigenvalues.len();
    for k in 0..count {
        let lam = ec.eigenvalues[k];
        if lam.im >= 0.0 {
            continue;
        }
        let partner = (0..count)
            .filter(|&i| ec.eigenvalues[i].im > 0.0)
            .min_by(|&a, &b| {
                (ec.eigenvalues[a] - lam.conj())
                    .norm()
                    .total_cmp(&(ec.eigenvalues[b] - lam.conj()).norm())
            });
        if let Some(p) = partner {
            if (ec.eigenvalues[p] - lam.conj()).norm() <= 10.0 * tol {
                ec.eigenvalues[k] = ec.eigenvalues[p].conj();
                ec.coefficients[k] = ec.coefficients[p].iter().map(|m| m.map(|z| z.conj())).collect();
            }
        }
    }
    for k in 0..count {
        if ec.eigenvalues[k].im == 0.0 {
            for m in &mut ec.coefficients[k] {
                m.iter_mut().for_each(|z| z.im = 0.0);
            }
        }
    }
}
