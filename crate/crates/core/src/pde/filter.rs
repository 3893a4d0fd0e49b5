use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::linalg::C64;
use crate::lti::{FinitePlant, Orientation};
use crate::pde::{Operator, Realization, TransferOracle, Truncation};

/// `G(s)/(s + 1)`.
#[derive(Debug, Clone)]
struct FilteredTransfer {
    inner: Arc<dyn Realization>,
}

impl TransferOracle for FilteredTransfer {
    fn inputs(&self) -> usize {
        self.inner.transfer().inputs()
    }

    fn outputs(&self) -> usize {
        self.inner.transfer().outputs()
    }

    fn domain_abscissa(&self) -> f64 {
        self.inner.transfer().domain_abscissa().max(-1.0)
    }

    fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        let pole = s + 1.0;
        if pole.norm() == 0.0 {
            return Err(CoreError::AtEigenvalue(s));
        }
        Ok(self.inner.transfer().eval(s)? / pole)
    }
}

/// A PDE block preceded by the stable first-order filter `x_u' = −x_u + v`,
/// whose state feeds the original input.
#[derive(Debug, Clone)]
pub struct FilterAugmented {
    inner: Arc<dyn Realization>,
    truncation: Truncation,
    transfer: FilteredTransfer,
}

impl FilterAugmented {
    pub fn new(inner: Arc<dyn Realization>) -> Result<Self> {
        let t = inner.truncation();
        let (n, m) = (t.dim(), t.b.ncols());
        let a = Operator::upper(t.a.clone(), t.b.clone(), Operator::Diagonal(DVector::from_element(m, -1.0)));
        let mut b = DMatrix::zeros(n + m, m);
        b.view_mut((n, 0), (m, m)).fill_with_identity();
        let mut c = DMatrix::zeros(t.c.nrows(), n + m);
        c.view_mut((0, 0), (t.c.nrows(), n)).copy_from(&t.c);
        Ok(FilterAugmented {
            truncation: Truncation::new(a, b, c)?,
            transfer: FilteredTransfer { inner: inner.clone() },
            inner,
        })
    }

    pub fn inner(&self) -> &Arc<dyn Realization> {
        &self.inner
    }
}

impl Realization for FilterAugmented {
    fn kind(&self) -> &str {
        "filter-augmented"
    }

    fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    fn transfer(&self) -> &dyn TransferOracle {
        &self.transfer
    }

    fn growth_bound(&self) -> f64 {
        self.inner.growth_bound().max(-1.0)
    }
}

/// Inserts the input filter between the controller and an actuator PDE.
pub fn augment_input_filter(
    plant: &FinitePlant,
    pde: Arc<dyn Realization>,
) -> Result<(FinitePlant, FilterAugmented)> {
    if plant.orientation != Orientation::Actuator {
        return Err(CoreError::config(
            "orientation",
            "the input filter applies to actuator cascades",
        ));
    }
    if plant.j.is_some() {
        return Err(CoreError::config(
            "plant.J",
            "the input filter is not combined with a direct input term",
        ));
    }
    plant.check_interface(pde.inputs(), pde.outputs())?;
    Ok((plant.clone(), FilterAugmented::new(pde)?))
}
