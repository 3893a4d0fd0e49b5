use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::pde::{Operator, Realization, TransferOracle, Truncation, TruncationTransfer};

/// A realization given directly by finite matrices, optionally paired with a
/// closed-form transfer function and a spatial grid.
#[derive(Clone)]
pub struct StateSpaceRealization {
    kind: String,
    truncation: Truncation,
    growth_bound: f64,
    grid: Option<Vec<f64>>,
    closed_form: Option<Arc<dyn TransferOracle>>,
    own: TruncationTransfer,
}

impl fmt::Debug for StateSpaceRealization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateSpaceRealization")
            .field("kind", &self.kind)
            .field("dim", &self.truncation.dim())
            .field("growth_bound", &self.growth_bound)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl StateSpaceRealization {
    /// The growth bound defaults to the spectral abscissa of `A`.
    pub fn new(kind: impl Into<String>, a: Operator, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let truncation = Truncation::new(a, b, c)?;
        let growth_bound = truncation.a.spectral_abscissa()?;
        let own = TruncationTransfer {
            truncation: truncation.clone(),
            abscissa: growth_bound,
        };
        Ok(StateSpaceRealization {
            kind: kind.into(),
            truncation,
            growth_bound,
            grid: None,
            closed_form: None,
            own,
        })
    }

    pub fn with_closed_form(mut self, oracle: Arc<dyn TransferOracle>) -> Result<Self> {
        if oracle.inputs() != self.truncation.b.ncols() || oracle.outputs() != self.truncation.c.nrows() {
            return Err(CoreError::DimensionMismatch(format!(
                "closed-form transfer is {}x{}, truncation is {}x{}",
                oracle.outputs(),
                oracle.inputs(),
                self.truncation.c.nrows(),
                self.truncation.b.ncols()
            )));
        }
        self.closed_form = Some(oracle);
        Ok(self)
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn closed_form(&self) -> Option<&dyn TransferOracle> {
        self.closed_form.as_deref()
    }
}

impl Realization for StateSpaceRealization {
    fn kind(&self) -> &str {
        &self.kind
    }

    fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    fn transfer(&self) -> &dyn TransferOracle {
        match &self.closed_form {
            Some(cf) => cf.as_ref(),
            None => &self.own,
        }
    }

    fn growth_bound(&self) -> f64 {
        self.growth_bound
    }

    fn grid(&self) -> Option<&[f64]> {
        self.grid.as_deref()
    }
}
