//! Wave equation `z_tt = z_xx` on `[0, 1]` with the absorbing condition
//! `z_x(0) = z_t(0)`, clamped end `z(1) = 0`, distributed input
//! `a + b·x²` and position trace `y = z(0)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::linalg::{c64, C64};
use crate::lti::{FinitePlant, Orientation};
use crate::pde::{Operator, Realization, TransferOracle, Truncation};

pub const MIN_GRID: usize = 16;

/// Weight of the grid-scale velocity damping.
pub const HYPERVISCOSITY: f64 = 1.0 / 16.0;

/// Closed-form transfer `[G_a(s), G_b(s)]` of the wave block.
pub fn wave_transfer_eval(s: C64) -> [C64; 2] {
    let q = (-s).exp();
    if s.norm() < 1.0 {
        // (cosh s − 1)/s² = Σ_{k≥1} s^{2k−2}/(2k)!
        // (2cosh s − 2 − s²)/s⁴ = 2 Σ_{k≥2} s^{2k−4}/(2k)!
        let s2 = s * s;
        let (mut a, mut b) = (c64(0.0, 0.0), c64(0.0, 0.0));
        let (mut pow, mut prev) = (c64(1.0, 0.0), c64(0.0, 0.0));
        let mut fact = 2.0;
        for k in 1..16 {
            if k > 1 {
                fact *= (2 * k - 1) as f64 * (2 * k) as f64;
            }
            a += pow / fact;
            b += prev * 2.0 / fact;
            prev = pow;
            pow *= s2;
        }
        return [a * q, b * q];
    }
    let one = c64(1.0, 0.0);
    let s2 = s * s;
    let a = ((one + q * q) * 0.5 - q) / s2;
    let b = ((one + q * q) - q * 2.0 - s2 * q) / (s2 * s2);
    [a, b]
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WaveTransfer;

impl TransferOracle for WaveTransfer {
    fn inputs(&self) -> usize {
        2
    }

    fn outputs(&self) -> usize {
        1
    }

    /// The transfer function is entire.
    fn domain_abscissa(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        let [a, b] = wave_transfer_eval(s);
        Ok(DMatrix::from_row_slice(1, 2, &[a, b]))
    }
}

/// Finite-difference truncation in first-order form with state `(f, g)`,
/// `f_i ≈ z(x_i)`, `g_i ≈ z_t(x_i)` at `x_i = i/M`, `i = 0..M−1`.
#[derive(Debug, Clone)]
pub struct WaveGrid {
    truncation: Truncation,
    grid: Vec<f64>,
    growth_bound: f64,
}

impl WaveGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < MIN_GRID {
            return Err(CoreError::config(
                "pde.truncation",
                format!("wave grid needs at least {MIN_GRID} points, got {m}"),
            ));
        }
        let dx = 1.0 / m as f64;
        let grid: Vec<f64> = (0..m).map(|i| i as f64 * dx).collect();
        let n = 2 * m;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..m {
            a[(i, m + i)] = 1.0;
        }
        let inv_dx2 = 1.0 / (dx * dx);
        // Ghost point from the central difference z_x(0) ≈ (f_1 − f_{−1})/2dx = g_0.
        a[(m, 0)] = -2.0 * inv_dx2;
        a[(m, 1)] = 2.0 * inv_dx2;
        a[(m, m)] = -2.0 / dx;
        for i in 1..m {
            a[(m + i, i)] = -2.0 * inv_dx2;
            a[(m + i, i - 1)] = inv_dx2;
            if i + 1 < m {
                a[(m + i, i + 1)] = inv_dx2;
            }
        }
        // Fourth-difference damping of the velocity, even across x = 0 and odd
        // across x = 1. It is self-adjoint in the energy inner product and
        // removes the nearly undamped sawtooth modes of the central scheme,
        // while acting as O(dx³) on smooth solutions.
        let mut d2 = DMatrix::<f64>::zeros(m, m);
        d2[(0, 0)] = -2.0;
        d2[(0, 1)] = 2.0;
        for i in 1..m {
            d2[(i, i)] = -2.0;
            d2[(i, i - 1)] = 1.0;
            if i + 1 < m {
                d2[(i, i + 1)] = 1.0;
            }
        }
        let damping = &d2 * &d2 * (-HYPERVISCOSITY / dx);
        let mut block = a.view_mut((m, m), (m, m));
        block += &damping;
        let mut b = DMatrix::zeros(n, 2);
        for (i, &x) in grid.iter().enumerate() {
            b[(m + i, 0)] = 1.0;
            b[(m + i, 1)] = x * x;
        }
        let mut c = DMatrix::zeros(1, n);
        c[(0, 0)] = 1.0;
        let operator = Operator::Dense(a);
        let growth_bound = operator.spectral_abscissa()?;
        Ok(WaveGrid {
            truncation: Truncation::new(operator, b, c)?,
            grid,
            growth_bound,
        })
    }

    pub fn points(&self) -> usize {
        self.grid.len()
    }

    /// Discrete energy `½(Σ w_i g_i² + Σ (f_{i+1} − f_i)²/dx)` with `f_M = 0`
    /// and half weight at the absorbing end; nonincreasing along undriven
    /// trajectories.
    pub fn energy(&self, state: &[f64]) -> f64 {
        let m = self.points();
        let dx = 1.0 / m as f64;
        let (f, g) = state.split_at(m);
        let kinetic: f64 = g
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 { 0.5 * dx } else { dx } * v * v)
            .sum();
        let potential: f64 = (0..m)
            .map(|i| {
                let next = if i + 1 < m { f[i + 1] } else { 0.0 };
                (next - f[i]).powi(2) / dx
            })
            .sum();
        0.5 * (kinetic + potential)
    }
}

impl Realization for WaveGrid {
    fn kind(&self) -> &str {
        "builtin-wave"
    }

    fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    fn transfer(&self) -> &dyn TransferOracle {
        &WaveTransfer
    }

    fn growth_bound(&self) -> f64 {
        self.growth_bound
    }

    fn grid(&self) -> Option<&[f64]> {
        Some(&self.grid)
    }
}

/// Kernel of `Π` for the default oscillator plant: rows are the position and
/// velocity components, columns the plant coordinates.
pub fn wave_pi_kernel(x: f64) -> [[f64; 2]; 2] {
    let (s, c) = (x - 1.0).sin_cos();
    [[c - x * x, s], [-s, c - x * x]]
}

/// Plant data before the change of variables `z = z̄ − x²Ḡw` that moves the
/// boundary input into the domain.
#[derive(Debug, Clone)]
pub struct WaveBasePlant {
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub gbar: DMatrix<f64>,
}

impl Default for WaveBasePlant {
    fn default() -> Self {
        WaveBasePlant {
            e: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            f: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            gbar: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        }
    }
}

impl WaveBasePlant {
    /// Sensor-case plant with `G = [2Ḡ; −ḠE²]`, `H = [0; −ḠEF]`.
    pub fn transformed(&self) -> Result<FinitePlant> {
        let n = self.e.nrows();
        if self.gbar.shape() != (1, n) {
            return Err(CoreError::config("plant.Gbar", format!("expected shape 1x{n}")));
        }
        let mut g = DMatrix::zeros(2, n);
        g.row_mut(0).copy_from(&(&self.gbar * 2.0));
        g.row_mut(1).copy_from(&-(&self.gbar * &self.e * &self.e));
        let m = self.f.ncols();
        let mut h = DMatrix::zeros(2, m);
        h.row_mut(1).copy_from(&-(&self.gbar * &self.e * &self.f));
        FinitePlant::new(Orientation::Sensor, self.e.clone(), self.f.clone(), g, h, None)
    }
}

/// Grid realization with `M` points and the transformed sensor plant.
pub fn wave_sensor(m: usize, base: Option<WaveBasePlant>) -> Result<(Arc<WaveGrid>, FinitePlant)> {
    let grid = WaveGrid::new(m)?;
    let plant = base.unwrap_or_default().transformed()?;
    Ok((Arc::new(grid), plant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complexify;
    use crate::pde::conjugate_symmetry_defect;

    #[test]
    fn formula_at_one() {
        let [a, b] = wave_transfer_eval(c64(1.0, 0.0));
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        assert!((a.re - (ch - 1.0) / (sh + ch)).abs() < 1e-14);
        assert!((b.re - (2.0 * ch - 3.0) / (sh + ch)).abs() < 1e-14);
    }

    #[test]
    fn removable_singularity() {
        let [a, b] = wave_transfer_eval(c64(0.0, 0.0));
        assert!((a.re - 0.5).abs() < 1e-15);
        assert!((b.re - 1.0 / 12.0).abs() < 1e-15);
        let s = c64(1e-3, 0.0);
        let direct = (s.cosh() - 1.0) / (s * s * (s.sinh() + s.cosh()));
        assert!((wave_transfer_eval(s)[0] - direct).norm() < 1e-8);
    }

    #[test]
    fn series_and_formula_agree_near_unit_circle() {
        for s in [c64(0.999, 0.0), c64(0.0, 0.999), c64(0.6, -0.7)] {
            let q = (-s).exp();
            let s2 = s * s;
            let a = ((c64(1.0, 0.0) + q * q) * 0.5 - q) / s2;
            let b = ((c64(1.0, 0.0) + q * q) - q * 2.0 - s2 * q) / (s2 * s2);
            let [sa, sb] = wave_transfer_eval(s);
            assert!((sa - a).norm() < 1e-12 && (sb - b).norm() < 1e-11, "{s}");
        }
    }

    #[test]
    fn conjugate_symmetry() {
        assert!(conjugate_symmetry_defect(&WaveTransfer, c64(1.0, 2.0)).unwrap() < 1e-15);
    }

    #[test]
    fn transformed_plant() {
        let plant = WaveBasePlant::default().transformed().unwrap();
        assert_eq!(plant.g, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 0.0]));
        assert_eq!(plant.h.as_slice(), &[0.0, -1.0]);
    }

    #[test]
    fn truncation_is_stable_and_converges() {
        let mut errors = Vec::new();
        for m in [32, 64, 128] {
            let grid = WaveGrid::new(m).unwrap();
            assert!(grid.growth_bound() < 0.0, "M = {m}");
            let g = grid.truncation().transfer_at(c64(1.0, 0.0)).unwrap();
            let exact = wave_transfer_eval(c64(1.0, 0.0));
            let err = (0..2).map(|j| ((g[(0, j)] - exact[j]) / exact[j]).norm()).fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[2] < 5e-3, "{errors:?}");
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    #[test]
    fn resolvent_definition() {
        let grid = WaveGrid::new(32).unwrap();
        let s = c64(1.0, 0.0);
        let rhs = complexify(&grid.truncation().b).column(0).into_owned();
        let x = grid.resolvent_apply(s, &rhs).unwrap();
        let a = complexify(&grid.truncation().a.to_dense());
        let residual = (&x * s - a * &x - &rhs).norm();
        assert!(residual < 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn pi_kernel_trace() {
        let k = wave_pi_kernel(0.0);
        assert!((k[0][0] - 1f64.cos()).abs() < 1e-15);
        assert!((k[0][1] + 1f64.sin()).abs() < 1e-15);
    }
}
