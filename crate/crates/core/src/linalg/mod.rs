//! Small dense linear-algebra helpers shared by the synthesis modules.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, SVD};

mod francis;

use crate::error::{CoreError, Result};

pub type C64 = Complex<f64>;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| c64(x, 0.0))
}

pub fn complexify_vec(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| c64(x, 0.0))
}

/// Drops the imaginary part after checking that it is negligible relative to
/// the magnitude of the matrix.
pub fn realify(m: &DMatrix<C64>, what: &'static str, tol: f64) -> Result<DMatrix<f64>> {
    let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let imag = m.iter().map(|z| z.im.abs()).fold(0.0_f64, f64::max);
    if imag > tol * scale {
        return Err(CoreError::NotReal { what, imag });
    }
    Ok(m.map(|z| z.re))
}

pub fn frobenius<T: ComplexField>(m: &DMatrix<T>) -> f64
where
    T::RealField: Into<f64>,
{
    m.iter()
        .map(|z| {
            let n: f64 = z.clone().modulus().into();
            n * n
        })
        .sum::<f64>()
        .sqrt()
}

pub fn ensure_square(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(CoreError::NonSquare {
            name,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Real Schur decomposition `m = q t qᵀ`, returned as `(q, t)`.
pub(crate) fn schur(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_finite(m)?;
    let out = francis::real_schur(m, true).ok_or_else(|| {
        CoreError::EigDecompositionFailure("real Schur iteration did not converge".into())
    })?;
    Ok((out.q.expect("Schur vectors requested"), out.t))
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::EigDecompositionFailure("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    ensure_square(m, "matrix")?;
    check_finite(m)?;
    let mut eigs = francis::real_schur(m, false)
        .ok_or_else(|| CoreError::EigDecompositionFailure("real Schur iteration did not converge".into()))?
        .eigenvalues;
    sort_eigenvalues(&mut eigs);
    Ok(eigs)
}

pub fn sort_eigenvalues(eigs: &mut [C64]) {
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Largest real part of the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCluster {
    pub center: C64,
    pub multiplicity: usize,
}

/// Groups numerically coincident eigenvalues (single linkage) and replaces
/// each group by its mean, which is far better conditioned than the
/// individual members of a perturbed Jordan block.
pub fn cluster_eigenvalues(eigs: &[C64], tol: f64) -> Vec<EigenCluster> {
    let n = eigs.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut c = i;
        while label[c] != r {
            let next = label[c];
            label[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() <= tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, C64, usize)> = Vec::new();
    for i in 0..n {
        let root = find(&mut label, i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => {
                g.1 += eigs[i];
                g.2 += 1;
            }
            None => groups.push((root, eigs[i], 1)),
        }
    }
    let mut out: Vec<EigenCluster> = groups
        .into_iter()
        .map(|(_, sum, m)| EigenCluster {
            center: sum / m as f64,
            multiplicity: m,
        })
        .collect();
    out.sort_by(|a, b| {
        a.center
            .re
            .total_cmp(&b.center.re)
            .then(a.center.im.total_cmp(&b.center.im))
    });
    out
}

/// Default clustering radius for the spectrum of `m`.
pub fn cluster_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-5 * frobenius(m).max(1.0)
}

/// Distinct eigenvalues of `m` with algebraic multiplicities.
pub fn distinct_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<EigenCluster>> {
    let eigs = eigenvalues(m)?;
    Ok(cluster_eigenvalues(&eigs, cluster_tolerance(m)))
}

/// Orthonormal basis of the (numerical) right null space of a square matrix.
/// Always returns at least `min_dim` columns, taken from the smallest singular
/// values.
pub fn null_space(m: &DMatrix<C64>, tol: f64, min_dim: usize) -> DMatrix<C64> {
    let n = m.ncols();
    debug_assert_eq!(m.nrows(), n);
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let mut cols: Vec<usize> = (0..n).filter(|&i| sv[i] <= tol).collect();
    if cols.len() < min_dim {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
        cols = order.into_iter().take(min_dim).collect();
    }
    let mut basis = DMatrix::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        for r in 0..n {
            basis[(r, k)] = vt[(i, r)].conj();
        }
    }
    basis
}

/// Smallest singular value of a (possibly wide) matrix together with the
/// matching left singular vector.
pub fn min_singular_left(m: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let rows = m.nrows();
    if rows == 0 {
        return (f64::INFINITY, DVector::zeros(0));
    }
    if m.ncols() < rows {
        // rank deficient by shape: any vector orthogonal to the column space
        let basis = null_space(&(m * m.adjoint()), 0.0, 1);
        return (0.0, basis.column(0).into_owned());
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let (idx, _) = sv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    (sv[idx], u.column(idx).into_owned())
}

/// Smallest singular value of an arbitrary matrix (zero when it has more rows
/// than columns... i.e. cannot have full row rank).
pub fn min_singular_row_rank(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.ncols() < m.nrows() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Rotates a vector so that its largest entry is real and positive.
pub fn normalize_phase(v: &mut DVector<C64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(c64(1.0, 0.0));
    let phase = big.conj() / big.norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

/// LU solve that rejects numerically singular systems.
pub fn checked_solve<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Option<DMatrix<T>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].clone().modulus()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if diag.is_empty() {
        return Some(b.clone());
    }
    if !(min > 1e-14 * max) {
        return None;
    }
    lu.solve(b)
}

/// Solves `left * X - X * right = rhs` as one vectorized linear system.
pub fn sylvester_kron<T: ComplexField<RealField = f64>>(
    left: &DMatrix<T>,
    right: &DMatrix<T>,
    rhs: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let (r, c) = (left.nrows(), right.nrows());
    if left.ncols() != r || right.ncols() != c || rhs.shape() != (r, c) {
        return Err(CoreError::DimensionMismatch(format!(
            "Sylvester data: left {:?}, right {:?}, rhs {:?}",
            left.shape(),
            right.shape(),
            rhs.shape()
        )));
    }
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(r, c));
    }
    let eye_r = DMatrix::<T>::identity(r, r);
    let eye_c = DMatrix::<T>::identity(c, c);
    let sys = eye_c.kronecker(left) - right.transpose().kronecker(&eye_r);
    let b = DMatrix::from_column_slice(r * c, 1, rhs.as_slice());
    let x = checked_solve(&sys, &b).ok_or(CoreError::SingularSystem)?;
    Ok(DMatrix::from_column_slice(r, c, x.as_slice()))
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut m = DMatrix::zeros(ra + rb, ca + cb);
    m.view_mut((0, 0), (ra, ca)).copy_from(a);
    m.view_mut((ra, ca), (rb, cb)).copy_from(b);
    m
}

pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols());
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

/// Builds a dense matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
