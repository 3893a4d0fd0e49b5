use std::fmt::Debug;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::lti::{place_injection_gain, place_stabilizing_gain, verify_hurwitz};

/// Computes the finite-dimensional gains of a design.
pub trait GainStrategy: Send + Sync + Debug {
    fn name(&self) -> &str;

    /// `K` with `E₁ + B̂K` Hurwitz.
    fn stabilizing(&self, e1: &DMatrix<f64>, bhat: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>>;

    /// `L` with `E₁ + L Ĉ` Hurwitz.
    fn injection(&self, c: &DMatrix<f64>, e1: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>>;
}

/// Shifted Riccati design with unit weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct LqrGains;

impl GainStrategy for LqrGains {
    fn name(&self) -> &str {
        "lqr"
    }

    fn stabilizing(&self, e1: &DMatrix<f64>, bhat: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
        place_stabilizing_gain(e1, bhat, margin)
    }

    fn injection(&self, c: &DMatrix<f64>, e1: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
        place_injection_gain(c, e1, margin)
    }
}

/// User-supplied gains, acting on the split coordinates of the plant (which
/// coincide with the given coordinates when `E` is already split). They are
/// only checked, never modified.
#[derive(Debug, Clone, Default)]
pub struct FixedGains {
    pub k: Option<DMatrix<f64>>,
    pub l: Option<DMatrix<f64>>,
}

fn expect_shape(what: &str, m: &DMatrix<f64>, shape: (usize, usize)) -> Result<()> {
    if m.shape() != shape {
        return Err(CoreError::config(
            format!("design.fixed.{what}"),
            format!("expected {}x{}, got {}x{}", shape.0, shape.1, m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

impl GainStrategy for FixedGains {
    fn name(&self) -> &str {
        "fixed"
    }

    fn stabilizing(&self, e1: &DMatrix<f64>, bhat: &DMatrix<f64>, _margin: f64) -> Result<DMatrix<f64>> {
        let k = self
            .k
            .as_ref()
            .ok_or_else(|| CoreError::config("design.fixed.K", "fixed strategy needs K"))?;
        expect_shape("K", k, (bhat.ncols(), e1.nrows()))?;
        verify_hurwitz(&(e1 + bhat * k))?;
        Ok(k.clone())
    }

    fn injection(&self, c: &DMatrix<f64>, e1: &DMatrix<f64>, _margin: f64) -> Result<DMatrix<f64>> {
        let l = self
            .l
            .as_ref()
            .ok_or_else(|| CoreError::config("design.fixed.L", "fixed strategy needs L"))?;
        expect_shape("L", l, (e1.nrows(), c.nrows()))?;
        verify_hurwitz(&(e1 + l * c))?;
        Ok(l.clone())
    }
}
