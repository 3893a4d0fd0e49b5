//! One-dimensional heat equation on `[0, 1]` with boundary input at `x = 1`
//! and point observation at `x = 0`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::linalg::{c64, C64};
use crate::lti::{FinitePlant, Orientation};
use crate::pde::{ModalRealization, Mode, ModeSource, TransferOracle};

/// Modes available to series evaluation of the builtin diffusion models.
pub const SERIES_MODES: usize = 10_000;

fn scalar(z: C64) -> DMatrix<C64> {
    DMatrix::from_element(1, 1, z)
}

/// `1/(√s sinh √s) − 1/s`: the Neumann transfer with the integrator mode
/// removed.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumannStableTransfer;

impl NeumannStableTransfer {
    pub fn value(s: C64) -> C64 {
        if s.norm() < 1.0 {
            // (r − sinh r)/(r² sinh r) with r² = s, as a ratio of even series.
            // top = Σ_{k≥1} s^{k−1}/(2k+1)!, bottom = Σ_{k≥0} s^k/(2k+1)!
            let (mut top, mut bottom) = (c64(0.0, 0.0), c64(1.0, 0.0));
            let mut pow = c64(1.0, 0.0);
            let mut fact = 1.0;
            for k in 1..20 {
                fact *= (2 * k) as f64 * (2 * k + 1) as f64;
                top += pow / fact;
                pow *= s;
                bottom += pow / fact;
            }
            return -top / bottom;
        }
        let r = s.sqrt();
        let q = (-r).exp();
        q * 2.0 / (r * (c64(1.0, 0.0) - q * q)) - s.inv()
    }
}

impl TransferOracle for NeumannStableTransfer {
    fn inputs(&self) -> usize {
        1
    }

    fn outputs(&self) -> usize {
        1
    }

    fn domain_abscissa(&self) -> f64 {
        -PI * PI
    }

    fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        Ok(scalar(Self::value(s)))
    }
}

/// `1/cosh √s`: Dirichlet-type diffusion with the input applied through a
/// flux at the far end.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirichletTransfer;

impl DirichletTransfer {
    pub fn value(s: C64) -> C64 {
        let r = s.sqrt();
        let q = (-r).exp();
        q * 2.0 / (c64(1.0, 0.0) + q * q)
    }
}

impl TransferOracle for DirichletTransfer {
    fn inputs(&self) -> usize {
        1
    }

    fn outputs(&self) -> usize {
        1
    }

    fn domain_abscissa(&self) -> f64 {
        -PI * PI / 4.0
    }

    fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        Ok(scalar(Self::value(s)))
    }
}

/// The harmonic oscillator plant driven by the diffusion output.
pub fn default_oscillator_plant() -> FinitePlant {
    FinitePlant::new(
        Orientation::Actuator,
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
        None,
    )
    .expect("static shapes")
}

/// Neumann heat equation `z_t = z_xx`, `z_x(0) = 0`, `z_x(1) = u`, `y = z(0)`.
///
/// The integrator mode `φ₀ = 1` is moved into the plant, which gains one
/// state and the direct input column `J`. Returns the stable modal part over
/// modes `1..=n` and the augmented plant.
pub fn neumann_diffusion(n: usize, plant: Option<FinitePlant>) -> Result<(ModalRealization, FinitePlant)> {
    if n == 0 {
        return Err(CoreError::config("pde.truncation", "diffusion needs at least one mode"));
    }
    let plant = plant.unwrap_or_else(default_oscillator_plant);
    if plant.orientation != Orientation::Actuator {
        return Err(CoreError::config("orientation", "the diffusion builtin is an actuator model"));
    }
    if plant.j.is_some() {
        return Err(CoreError::config("plant.J", "the diffusion builtin supplies its own J"));
    }
    plant.check_interface(1, 1)?;
    let source = ModeSource::Generator {
        modes: Arc::new(|i| {
            let k = (i + 1) as f64;
            Mode {
                eigenvalue: -k * k * PI * PI,
                input: vec![if (i + 1) % 2 == 0 { SQRT_2 } else { -SQRT_2 }],
                output: vec![SQRT_2],
            }
        }),
        n_max: SERIES_MODES.max(n),
    };
    let realization = ModalRealization::new(
        "builtin-diffusion",
        source,
        n,
        Some(Arc::new(NeumannStableTransfer)),
    )?;

    let nw = plant.dim();
    let mut e = DMatrix::zeros(nw + 1, nw + 1);
    e.view_mut((0, 0), (nw, nw)).copy_from(&plant.e);
    e.view_mut((0, nw), (nw, 1)).copy_from(&plant.f);
    let mut f = DMatrix::zeros(nw + 1, 1);
    f.view_mut((0, 0), (nw, 1)).copy_from(&plant.f);
    let mut j = DMatrix::zeros(nw + 1, 1);
    j[(nw, 0)] = 1.0;
    let p = plant.g.nrows();
    let mut g = DMatrix::zeros(p, nw + 1);
    g.view_mut((0, 0), (p, nw)).copy_from(&plant.g);
    g.view_mut((0, nw), (p, 1)).copy_from(&plant.h);
    let augmented = FinitePlant::new(Orientation::Actuator, e, f, g, plant.h.clone(), Some(j))?;
    Ok((realization, augmented))
}

/// Heat equation whose transfer is `1/cosh √s`, with modes
/// `λ_n = −(n+½)²π²`, `n ≥ 0`. The input operator is not admissible on the
/// state space, so it is meant to be used through the input filter.
pub fn dirichlet_diffusion(n: usize) -> Result<ModalRealization> {
    if n == 0 {
        return Err(CoreError::config("pde.truncation", "diffusion needs at least one mode"));
    }
    let source = ModeSource::Generator {
        modes: Arc::new(|i| {
            let mu = (i as f64 + 0.5) * PI;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            Mode {
                eigenvalue: -mu * mu,
                input: vec![sign * SQRT_2 * mu],
                output: vec![SQRT_2],
            }
        }),
        n_max: SERIES_MODES.max(n),
    };
    ModalRealization::new("builtin-dirichlet-diffusion", source, n, Some(Arc::new(DirichletTransfer)))
}
