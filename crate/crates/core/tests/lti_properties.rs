use cascade_core::linalg::{eigenvalues, frobenius, spectral_abscissa};
use cascade_core::lti::{
    exp_coefficients, hautus_stabilizable, place_injection_gain, place_stabilizing_gain,
    split_stable_unstable,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(n: usize, m: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-range..range, n * m).prop_map(move |v| DMatrix::from_row_slice(n, m, &v))
}

fn square(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max).prop_flat_map(|n| matrix(n, n, 2.0))
}

/// `S J S⁻¹` with a single Jordan block of full size.
fn jordan_conjugate(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2..=max).prop_flat_map(|n| {
        (Just(n), -1.5..1.5f64, matrix(n, n, 0.3)).prop_map(|(n, lam, pert)| {
            let mut j = DMatrix::identity(n, n) * lam;
            for i in 0..n - 1 {
                j[(i, i + 1)] = 1.0;
            }
            let s = DMatrix::identity(n, n) + pert;
            let s_inv = s.clone().try_inverse().expect("perturbed identity");
            s * j * s_inv
        })
    })
}

fn check_expansion(e1: &DMatrix<f64>) -> Result<(), TestCaseError> {
    let ec = exp_coefficients(e1).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(ec.identity_defect() < 1e-10, "identity defect {}", ec.identity_defect());
    prop_assert!(ec.recurrence_defect(e1) < 1e-10, "recurrence {}", ec.recurrence_defect(e1));
    for t in [0.1, 1.0, 5.0] {
        let reference = (-e1 * t).exp();
        let err = frobenius(&(ec.exp_neg(t) - &reference)) / frobenius(&reference);
        prop_assert!(err < 1e-9, "t = {t}: relative error {err:e}");
    }
    Ok(())
}

/// Rank of an integer matrix by fraction-free elimination.
fn exact_rank(mut a: Vec<Vec<i128>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    let mut prev = 1i128;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c] != 0) else { continue };
        a.swap(rank, p);
        for r in (rank + 1)..rows {
            for k in (c + 1)..cols {
                a[r][k] = (a[rank][c] * a[r][k] - a[r][c] * a[rank][k]) / prev;
            }
            a[r][c] = 0;
        }
        prev = a[rank][c];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn controllability_rank(e: &[Vec<i128>], b: &[Vec<i128>]) -> usize {
    let n = e.len();
    let m = b[0].len();
    let mut blocks = vec![b.to_vec()];
    for _ in 1..n {
        let last = blocks.last().unwrap();
        let next: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..m).map(|j| (0..n).map(|k| e[i][k] * last[k][j]).sum()).collect())
            .collect();
        blocks.push(next);
    }
    let mat: Vec<Vec<i128>> = (0..n)
        .map(|i| blocks.iter().flat_map(|blk| blk[i].clone()).collect())
        .collect();
    exact_rank(mat)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_matches_expm(e1 in square(5)) {
        check_expansion(&e1)?;
    }

    #[test]
    fn expansion_matches_expm_for_jordan_blocks(e1 in jordan_conjugate(5)) {
        check_expansion(&e1)?;
    }

    #[test]
    fn split_preserves_spectrum(e in square(6)) {
        let tol = 1e-9;
        let split = match split_stable_unstable(&e, tol) {
            Ok(s) => s,
            Err(cascade_core::CoreError::BoundaryEigenvalue { .. }) => return Ok(()),
            Err(err) => return Err(TestCaseError::fail(err.to_string())),
        };
        let mut joined = eigenvalues(&split.e1).unwrap();
        joined.extend(eigenvalues(&split.e2).unwrap());
        let mut reference = eigenvalues(&e).unwrap();
        for z in &joined {
            let (idx, dist) = reference
                .iter()
                .enumerate()
                .map(|(i, w)| (i, (w - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(dist < 1e-8, "eigenvalue {z} unmatched ({dist:e})");
            reference.remove(idx);
        }
        prop_assert!(reference.is_empty());
        prop_assert!(split.e1.nrows() == 0 || eigenvalues(&split.e1).unwrap().iter().all(|z| z.re >= -tol * 10.0));
        prop_assert!(split.e2.nrows() == 0 || spectral_abscissa(&split.e2).unwrap() < -tol);
        let back = &split.t_inv * &e * &split.t;
        let blocks = cascade_core::linalg::block_diag(&split.e1, &split.e2);
        prop_assert!(frobenius(&(back - blocks)) <= 1e-10 * frobenius(&e));
    }

    #[test]
    fn stabilizing_gain_passes_eigenvalue_check(
        (e1, b) in (1..=4usize, 1..=2usize).prop_flat_map(|(n, m)| (matrix(n, n, 2.0), matrix(n, m, 2.0))),
        margin in 0.0..1.0f64,
    ) {
        match place_stabilizing_gain(&e1, &b, margin) {
            Ok(k) => prop_assert!(spectral_abscissa(&(&e1 + &b * &k)).unwrap() <= -margin * (1.0 - 1e-9) + 1e-12),
            Err(cascade_core::CoreError::NotStabilizable { .. } | cascade_core::CoreError::MarginUnreachable { .. }) => {
                prop_assert!(!hautus_stabilizable(&e1, &b, 1e-6).unwrap().holds);
            }
            Err(err) => return Err(TestCaseError::fail(err.to_string())),
        }
    }

    #[test]
    fn injection_gain_passes_eigenvalue_check(
        (e1, g) in (1..=4usize, 1..=2usize).prop_flat_map(|(n, p)| (matrix(n, n, 2.0), matrix(p, n, 2.0))),
    ) {
        if let Ok(l) = place_injection_gain(&g, &e1, 0.1) {
            prop_assert!(spectral_abscissa(&(&e1 + &l * &g)).unwrap() < 0.0);
        }
    }

    #[test]
    fn hautus_agrees_with_exact_controllability(
        (e, b) in (1..=4usize, 1..=2usize).prop_flat_map(|(n, m)| (
            prop::collection::vec(prop::collection::vec(-2i128..=2, n), n),
            prop::collection::vec(prop::collection::vec(-1i128..=1, m), n),
        )),
    ) {
        let n = e.len();
        let to_f = |v: &Vec<Vec<i128>>| {
            DMatrix::from_fn(v.len(), v[0].len(), |i, j| v[i][j] as f64)
        };
        let verdict = hautus_stabilizable(&to_f(&e), &to_f(&b), 1e-9).unwrap();
        prop_assert_eq!(verdict.holds, controllability_rank(&e, &b) == n);
    }
}
