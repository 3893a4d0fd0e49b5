//! Random cascade instances shared by the property and acceptance suites.
#![allow(dead_code)]

use cascade_core::linalg::spectral_abscissa;
use cascade_core::lti::{
    exp_coefficients, hautus_detectable, hautus_stabilizable, FinitePlant, NormalizedPlant, Orientation,
};
use cascade_core::pde::{Operator, Realization, StateSpaceRealization};
use cascade_core::sylvester::{
    kronecker_oracle, output_times_pi, pi_times_input, solve_actuator_pi, solve_sensor_pi,
};
use cascade_core::synthesis::{check_actuator_solvability, check_sensor_solvability, DEFAULT_SOLVABILITY_TOLERANCE};
use cascade_core::Result;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, range: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-range..range))
}

/// `S D S⁻¹` with `D` block diagonal: one real eigenvalue `λ₀` first, then
/// real eigenvalues or rotation blocks, all with real part in `[0.1, 2]`.
pub fn unstable_matrix(rng: &mut impl Rng, n: usize) -> (DMatrix<f64>, f64) {
    let lam0 = rng.random_range(0.2..2.0);
    let mut d = DMatrix::zeros(n, n);
    d[(0, 0)] = lam0;
    let mut i = 1;
    while i < n {
        if i + 1 < n && rng.random_bool(0.5) {
            let (re, im) = (rng.random_range(0.1..1.5), rng.random_range(0.3..2.0));
            d[(i, i)] = re;
            d[(i + 1, i + 1)] = re;
            d[(i, i + 1)] = im;
            d[(i + 1, i)] = -im;
            i += 2;
        } else {
            d[(i, i)] = rng.random_range(0.1..2.0);
            i += 1;
        }
    }
    let s = DMatrix::identity(n, n) + random_matrix(rng, n, n, 0.3);
    let s_inv = s.clone().try_inverse().expect("perturbed identity");
    (s * d * s_inv, lam0)
}

/// Random matrix shifted so that its spectral abscissa is at most `−0.1`.
pub fn stable_matrix(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let r = random_matrix(rng, n, n, 1.0);
    let shift = spectral_abscissa(&r).unwrap() + rng.random_range(0.1..1.1);
    r - DMatrix::identity(n, n) * shift
}

/// Jordan block of size `n` at `λ`, conjugated by a perturbed identity.
pub fn jordan_conjugate(rng: &mut impl Rng, n: usize, lam: f64) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n, n) * lam;
    for i in 0..n.saturating_sub(1) {
        j[(i, i + 1)] = 1.0;
    }
    let s = DMatrix::identity(n, n) + random_matrix(rng, n, n, 0.3);
    let s_inv = s.clone().try_inverse().expect("perturbed identity");
    s * j * s_inv
}

/// A cascade of a fully unstable plant with a finite stable realization.
pub struct Instance {
    pub plant: FinitePlant,
    pub pde: StateSpaceRealization,
    /// Real eigenvalue of `E` that is a transmission zero of the PDE when the
    /// instance was built unsolvable.
    pub lam0: f64,
}

impl Instance {
    pub fn normalized(&self) -> NormalizedPlant {
        self.plant.normalize(1e-9).expect("plant splits")
    }
}

/// Single-input single-output instance; with `zero` the PDE transfer vanishes
/// at `λ₀`, which makes the cascade unsolvable.
pub fn siso_instance(rng: &mut impl Rng, orientation: Orientation, zero: bool) -> Instance {
    let n1 = rng.random_range(1..=3);
    let dim = rng.random_range(1..=6);
    let (e, lam0) = unstable_matrix(rng, n1);
    let a = stable_matrix(rng, dim);
    let b = random_matrix(rng, dim, 1, 1.0);
    let mut c = random_matrix(rng, 1, dim, 1.0);
    if zero {
        let shifted = DMatrix::identity(dim, dim) * lam0 - &a;
        let r = shifted.lu().solve(&b).expect("λ₀ is not an eigenvalue of A");
        let coef = (&c * &r)[(0, 0)] / r.norm_squared();
        c -= r.transpose() * coef;
    }
    let f = random_matrix(rng, n1, 1, 1.0) + DMatrix::from_element(n1, 1, 0.1);
    let g = random_matrix(rng, 1, n1, 1.0) + DMatrix::from_element(1, n1, 0.1);
    let plant = FinitePlant::new(orientation, e, f, g, DMatrix::zeros(1, 1), None).unwrap();
    let pde = StateSpaceRealization::new("state-space", Operator::Dense(a), b, c).unwrap();
    Instance { plant, pde, lam0 }
}

/// Formula and vectorized solutions of the Sylvester equation together
/// with the absolute residual of the formula solution.
pub struct SylvesterPair {
    pub formula: DMatrix<f64>,
    pub oracle: DMatrix<f64>,
    pub residual: f64,
}

impl SylvesterPair {
    pub fn mismatch(&self) -> f64 {
        (&self.formula - &self.oracle).norm() / self.oracle.norm().max(1.0)
    }
}

/// Random Sylvester data with `n₁ ≤ 3`, `dim A₁ ≤ 6` and up to two channels.
pub fn sylvester_pair(seed: u64, orientation: Orientation) -> Result<SylvesterPair> {
    let mut rng = rng(seed);
    let n1 = rng.random_range(1..=3);
    let dim = rng.random_range(1..=6);
    let channels = rng.random_range(1..=2);
    let (e1, _) = unstable_matrix(&mut rng, n1);
    let a1 = stable_matrix(&mut rng, dim);
    let ec = exp_coefficients(&e1)?;
    let op = Operator::Dense(a1.clone());
    match orientation {
        Orientation::Actuator => {
            let f1 = random_matrix(&mut rng, n1, channels, 1.0);
            let c1 = random_matrix(&mut rng, channels, dim, 1.0);
            let formula = solve_actuator_pi(&e1, &f1, &op, &c1, &ec)?.pi;
            let rhs = &f1 * &c1;
            let oracle = kronecker_oracle(&e1, &a1, &rhs)?;
            let residual = (&e1 * &formula - &formula * &a1 - rhs).norm();
            Ok(SylvesterPair { formula, oracle, residual })
        }
        Orientation::Sensor => {
            let g1 = random_matrix(&mut rng, channels, n1, 1.0);
            let b1 = random_matrix(&mut rng, dim, channels, 1.0);
            let formula = solve_sensor_pi(&e1, &g1, &op, &b1, &ec)?.pi;
            let rhs = &b1 * &g1;
            let oracle = kronecker_oracle(&a1, &e1, &(-&rhs))?;
            let residual = (&formula * &e1 - &a1 * &formula - rhs).norm();
            Ok(SylvesterPair { formula, oracle, residual })
        }
    }
}

/// Verdicts of the solvability check and of the Hautus test on the finite
/// product (`(E₁, ΠB₁)` or `(C₁Π, E₁)`).
pub fn iff_verdicts(inst: &Instance) -> Result<(bool, bool)> {
    let np = inst.normalized();
    let transfer = inst.pde.transfer();
    let ec = exp_coefficients(np.e1())?;
    match np.orientation() {
        Orientation::Actuator => {
            let report = check_actuator_solvability(&np, transfer, DEFAULT_SOLVABILITY_TOLERANCE)?;
            let pi_b = pi_times_input(&ec, &np.f1(), transfer)?;
            Ok((report.solvable, hautus_stabilizable(np.e1(), &pi_b, HAUTUS_TOLERANCE)?.holds))
        }
        Orientation::Sensor => {
            let report = check_sensor_solvability(&np, transfer, DEFAULT_SOLVABILITY_TOLERANCE)?;
            let c1_pi = output_times_pi(&ec, &np.g1(), transfer)?;
            Ok((report.solvable, hautus_detectable(&c1_pi, np.e1(), HAUTUS_TOLERANCE)?.holds))
        }
    }
}

pub const HAUTUS_TOLERANCE: f64 = 1e-8;
