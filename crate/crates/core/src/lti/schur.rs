//! Ordered real Schur form and the stable/unstable block split.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::linalg::{
    c64, cluster_eigenvalues, cluster_tolerance, eigenvalues, ensure_square, frobenius, schur,
    sylvester_kron, EigenCluster, C64,
};

/// Real Schur form `m = q t qᵀ` whose leading `selected` rows/columns carry
/// exactly the eigenvalues accepted by the selection predicate.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub selected: usize,
}

fn diagonal_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

/// Eigenvalue with nonnegative imaginary part of a 1x1 or 2x2 diagonal block.
fn block_eigenvalue(t: &DMatrix<f64>, start: usize, size: usize) -> C64 {
    if size == 1 {
        return c64(t[(start, start)], 0.0);
    }
    let (a, b, c, d) = (
        t[(start, start)],
        t[(start, start + 1)],
        t[(start + 1, start)],
        t[(start + 1, start + 1)],
    );
    let half = 0.5 * (a - d);
    let disc = half * half + b * c;
    c64(0.5 * (a + d), (-disc).max(0.0).sqrt())
}

fn rotate(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, g: &DMatrix<f64>) {
    let k = g.nrows();
    let rows = g.transpose() * t.rows(i, k);
    t.rows_mut(i, k).copy_from(&rows);
    let cols = t.columns(i, k) * g;
    t.columns_mut(i, k).copy_from(&cols);
    let qc = q.columns(i, k) * g;
    q.columns_mut(i, k).copy_from(&qc);
}

/// Zeroes negligible subdiagonals and splits 2x2 blocks that carry a real
/// eigenvalue pair, so every remaining 2x2 block is a genuine complex pair.
fn standardize(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>) -> Result<()> {
    let n = t.nrows();
    for i in 0..n.saturating_sub(1) {
        let scale = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
        if t[(i + 1, i)].abs() <= f64::EPSILON * scale {
            t[(i + 1, i)] = 0.0;
        }
        for r in (i + 2)..n {
            t[(r, i)] = 0.0;
        }
    }
    for i in 0..n.saturating_sub(2) {
        if t[(i + 1, i)] != 0.0 && t[(i + 2, i + 1)] != 0.0 {
            return Err(CoreError::EigDecompositionFailure(
                "Schur factor is not quasi-triangular".into(),
            ));
        }
    }
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc >= 0.0 {
            let lambda = 0.5 * (a + d) + disc.sqrt();
            let v1 = (b, lambda - a);
            let v2 = (lambda - d, c);
            let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
            let r = x.hypot(y);
            let (cs, sn) = (x / r, y / r);
            let g = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
            rotate(t, q, i, &g);
            t[(i + 1, i)] = 0.0;
        }
        i += 2;
    }
    Ok(())
}

/// Swaps the adjacent diagonal blocks starting at `i` (sizes `p` then `r`)
/// with a direct orthogonal transformation.
fn swap_blocks(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, p: usize, r: usize) -> Result<()> {
    let k = p + r;
    let a11 = t.view((i, i), (p, p)).clone_owned();
    let a12 = t.view((i, i + p), (p, r)).clone_owned();
    let a22 = t.view((i + p, i + p), (r, r)).clone_owned();
    let x = sylvester_kron(&a11, &a22, &a12).map_err(|_| {
        CoreError::EigDecompositionFailure("cannot swap Schur blocks with equal spectra".into())
    })?;
    // The span of [-X; I] is invariant with the spectrum of a22; completing it
    // to an orthonormal basis moves that spectrum to the top.
    let mut basis = DMatrix::zeros(k, r + k);
    basis.view_mut((0, 0), (p, r)).copy_from(&(-x));
    basis.view_mut((p, 0), (r, r)).fill_with_identity();
    basis.view_mut((0, r), (k, k)).fill_with_identity();
    let g = basis.qr().q();
    rotate(t, q, i, &g);
    let spill = frobenius(&t.view((i + r, i), (p, r)).clone_owned());
    if spill > 1e3 * f64::EPSILON * frobenius(t).max(1.0) {
        return Err(CoreError::EigDecompositionFailure(format!(
            "Schur block swap lost accuracy (spill {spill:e})"
        )));
    }
    t.view_mut((i + r, i), (p, r)).fill(0.0);
    Ok(())
}

/// Real Schur form reordered so that blocks whose eigenvalue satisfies
/// `select` come first.
pub fn ordered_schur(m: &DMatrix<f64>, select: impl Fn(C64) -> bool) -> Result<OrderedSchur> {
    ensure_square(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(OrderedSchur {
            q: DMatrix::zeros(0, 0),
            t: DMatrix::zeros(0, 0),
            selected: 0,
        });
    }
    let (mut q, mut t) = schur(m)?;
    standardize(&mut t, &mut q)?;
    let mut swaps = 0;
    loop {
        let blocks = diagonal_blocks(&t);
        let flags: Vec<bool> = blocks
            .iter()
            .map(|&(s, sz)| select(block_eigenvalue(&t, s, sz)))
            .collect();
        let Some(j) = (0..blocks.len().saturating_sub(1)).find(|&j| !flags[j] && flags[j + 1]) else {
            let selected = blocks
                .iter()
                .zip(&flags)
                .filter(|(_, &f)| f)
                .map(|(b, _)| b.1)
                .sum();
            return Ok(OrderedSchur { q, t, selected });
        };
        swap_blocks(&mut t, &mut q, blocks[j].0, blocks[j].1, blocks[j + 1].1)?;
        swaps += 1;
        if swaps > n * n + 8 {
            return Err(CoreError::EigDecompositionFailure(
                "Schur reordering did not terminate".into(),
            ));
        }
    }
}

/// Similarity `t_inv * E * t = blockdiag(e1, e2)` separating the closed
/// right half-plane part `e1` from the strictly stable part `e2`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub split_tolerance: f64,
}

impl SpectralSplit {
    pub fn n1(&self) -> usize {
        self.e1.nrows()
    }

    pub fn n2(&self) -> usize {
        self.e2.nrows()
    }

    pub fn is_identity(&self) -> bool {
        let n = self.t.nrows();
        self.t == DMatrix::identity(n, n)
    }
}

pub const DEFAULT_SPLIT_TOLERANCE: f64 = 1e-9;

/// Splits the spectrum of `e` at `Re λ = -tol`.
///
/// Eigenvalue groups whose mean real part lies in `(-sqrt(tol), -tol)` are
/// too close to the boundary to classify reliably and are rejected.
pub fn split_stable_unstable(e: &DMatrix<f64>, tol: f64) -> Result<SpectralSplit> {
    ensure_square(e, "E")?;
    let n = e.nrows();
    let clusters = cluster_eigenvalues(&eigenvalues(e)?, cluster_tolerance(e));
    let (lower, upper) = (-tol.sqrt(), -tol);
    for cl in &clusters {
        if cl.center.re > lower && cl.center.re < upper {
            return Err(CoreError::BoundaryEigenvalue {
                eigenvalue: cl.center,
                lower,
                upper,
            });
        }
    }
    let unstable = |z: C64| nearest(&clusters, z).center.re >= -tol;
    let n1: usize = clusters
        .iter()
        .filter(|c| c.center.re >= -tol)
        .map(|c| c.multiplicity)
        .sum();

    if let Some(split) = already_split(e, n1, tol, &unstable)? {
        return Ok(split);
    }

    let os = ordered_schur(e, unstable)?;
    if os.selected != n1 {
        return Err(CoreError::EigDecompositionFailure(format!(
            "reordered Schur form selected {} eigenvalues, expected {n1}",
            os.selected
        )));
    }
    let n2 = n - n1;
    let t11 = os.t.view((0, 0), (n1, n1)).clone_owned();
    let t12 = os.t.view((0, n1), (n1, n2)).clone_owned();
    let t22 = os.t.view((n1, n1), (n2, n2)).clone_owned();
    let y = sylvester_kron(&t11, &t22, &(-t12)).map_err(|_| {
        CoreError::EigDecompositionFailure("cannot decouple spectral blocks".into())
    })?;
    let mut upper_unit = DMatrix::identity(n, n);
    upper_unit.view_mut((0, n1), (n1, n2)).copy_from(&y);
    let mut upper_inv = DMatrix::identity(n, n);
    upper_inv.view_mut((0, n1), (n1, n2)).copy_from(&(-y));
    let t = &os.q * upper_unit;
    let t_inv = upper_inv * os.q.transpose();

    let split = SpectralSplit {
        t,
        t_inv,
        e1: t11,
        e2: t22,
        split_tolerance: tol,
    };
    let defect = frobenius(&(&split.t_inv * e * &split.t - block_diag_of(&split)));
    if defect > 1e-10 * frobenius(e).max(f64::MIN_POSITIVE) {
        return Err(CoreError::EigDecompositionFailure(format!(
            "spectral split is ill-conditioned (relative defect {:e})",
            defect / frobenius(e)
        )));
    }
    Ok(split)
}

fn block_diag_of(s: &SpectralSplit) -> DMatrix<f64> {
    crate::linalg::block_diag(&s.e1, &s.e2)
}

fn nearest(clusters: &[EigenCluster], z: C64) -> &EigenCluster {
    clusters
        .iter()
        .min_by(|a, b| (a.center - z).norm().total_cmp(&(b.center - z).norm()))
        .expect("matrix is nonempty")
}

/// Identity split when `e` is already block diagonal with the right
/// classification, which keeps user coordinates untouched.
fn already_split(
    e: &DMatrix<f64>,
    n1: usize,
    tol: f64,
    unstable: &impl Fn(C64) -> bool,
) -> Result<Option<SpectralSplit>> {
    let n = e.nrows();
    let n2 = n - n1;
    let off_zero = e.view((0, n1), (n1, n2)).iter().all(|&x| x == 0.0)
        && e.view((n1, 0), (n2, n1)).iter().all(|&x| x == 0.0);
    if !off_zero {
        return Ok(None);
    }
    let e1 = e.view((0, 0), (n1, n1)).clone_owned();
    let e2 = e.view((n1, n1), (n2, n2)).clone_owned();
    if !eigenvalues(&e1)?.into_iter().all(unstable) || eigenvalues(&e2)?.into_iter().any(unstable) {
        return Ok(None);
    }
    Ok(Some(SpectralSplit {
        t: DMatrix::identity(n, n),
        t_inv: DMatrix::identity(n, n),
        e1,
        e2,
        split_tolerance: tol,
    }))
}
