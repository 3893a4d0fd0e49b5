use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lti::schur::{split_stable_unstable, SpectralSplit};

/// Direction of the cascade: the PDE drives the plant (actuator) or the plant
/// drives the PDE (sensor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Actuator,
    Sensor,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Actuator => "actuator",
            Orientation::Sensor => "sensor",
        }
    }
}

/// The ODE block `(E, F, G, H, J)`.
///
/// Actuator cascade: `w' = E w + F y_pde + J u`, `y = G w + H y_pde`, where
/// `u` also drives the PDE. Sensor cascade: `w' = E w + F u`, the PDE is fed
/// `G w + H u`, and the measurement is `y = C z + J w`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePlant {
    pub orientation: Orientation,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub j: Option<DMatrix<f64>>,
}

fn shape_error(name: &str, expected: String, got: (usize, usize)) -> CoreError {
    CoreError::DimensionMismatch(format!("{name}: expected {expected}, got {}x{}", got.0, got.1))
}

impl FinitePlant {
    pub fn new(
        orientation: Orientation,
        e: DMatrix<f64>,
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        j: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if e.nrows() != e.ncols() {
            return Err(CoreError::NonSquare {
                name: "E",
                rows: e.nrows(),
                cols: e.ncols(),
            });
        }
        let n = e.nrows();
        if f.nrows() != n {
            return Err(shape_error("F", format!("{n} rows"), f.shape()));
        }
        if g.ncols() != n {
            return Err(shape_error("G", format!("{n} columns"), g.shape()));
        }
        if h.shape() != (g.nrows(), f.ncols()) {
            return Err(shape_error("H", format!("{}x{}", g.nrows(), f.ncols()), h.shape()));
        }
        if let Some(j) = &j {
            let ok = match orientation {
                Orientation::Actuator => j.nrows() == n,
                Orientation::Sensor => j.ncols() == n,
            };
            if !ok {
                let side = match orientation {
                    Orientation::Actuator => "rows",
                    Orientation::Sensor => "columns",
                };
                return Err(shape_error("J", format!("{n} {side}"), j.shape()));
            }
        }
        let plant = FinitePlant {
            orientation,
            e,
            f,
            g,
            h,
            j,
        };
        if plant.all_matrices().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(CoreError::DimensionMismatch("plant matrices must be finite".into()));
        }
        Ok(plant)
    }

    fn all_matrices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        [&self.e, &self.f, &self.g, &self.h].into_iter().chain(self.j.as_ref())
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// Dimension of the external input `u`.
    pub fn input_dim(&self) -> usize {
        match self.orientation {
            Orientation::Actuator => self.j.as_ref().map_or(0, |j| j.ncols()),
            Orientation::Sensor => self.f.ncols(),
        }
    }

    /// Checks the interface against a PDE block with the given input and
    /// output counts.
    pub fn check_interface(&self, pde_inputs: usize, pde_outputs: usize) -> Result<()> {
        let mismatch = |what: &str, exp: usize, got: usize| {
            Err(CoreError::DimensionMismatch(format!(
                "{what}: expected {exp} to match the PDE block, got {got}"
            )))
        };
        match self.orientation {
            Orientation::Actuator => {
                if self.f.ncols() != pde_outputs {
                    return mismatch("columns of F", pde_outputs, self.f.ncols());
                }
                if let Some(j) = &self.j {
                    if j.ncols() != pde_inputs {
                        return mismatch("columns of J", pde_inputs, j.ncols());
                    }
                }
            }
            Orientation::Sensor => {
                if self.g.nrows() != pde_inputs {
                    return mismatch("rows of G", pde_inputs, self.g.nrows());
                }
                if let Some(j) = &self.j {
                    if j.nrows() != pde_outputs {
                        return mismatch("rows of J", pde_outputs, j.nrows());
                    }
                }
            }
        }
        Ok(())
    }

    /// Moves to coordinates in which `E` is block diagonal with the closed
    /// right half-plane block first.
    pub fn normalize(&self, split_tolerance: f64) -> Result<NormalizedPlant> {
        let split = split_stable_unstable(&self.e, split_tolerance)?;
        let e = &split.t_inv * &self.e * &split.t;
        let f = &split.t_inv * &self.f;
        let g = &self.g * &split.t;
        let j = self.j.as_ref().map(|j| match self.orientation {
            Orientation::Actuator => &split.t_inv * j,
            Orientation::Sensor => j * &split.t,
        });
        Ok(NormalizedPlant {
            original: self.clone(),
            e,
            f,
            g,
            j,
            split,
        })
    }
}

/// A plant expressed in split coordinates `w' = T⁻¹ w`.
#[derive(Debug, Clone)]
pub struct NormalizedPlant {
    pub original: FinitePlant,
    pub split: SpectralSplit,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub j: Option<DMatrix<f64>>,
}

impl NormalizedPlant {
    pub fn orientation(&self) -> Orientation {
        self.original.orientation
    }

    pub fn n1(&self) -> usize {
        self.split.n1()
    }

    pub fn n2(&self) -> usize {
        self.split.n2()
    }

    pub fn e1(&self) -> &DMatrix<f64> {
        &self.split.e1
    }

    pub fn e2(&self) -> &DMatrix<f64> {
        &self.split.e2
    }

    pub fn f1(&self) -> DMatrix<f64> {
        self.f.rows(0, self.n1()).clone_owned()
    }

    pub fn f2(&self) -> DMatrix<f64> {
        self.f.rows(self.n1(), self.n2()).clone_owned()
    }

    pub fn g1(&self) -> DMatrix<f64> {
        self.g.columns(0, self.n1()).clone_owned()
    }

    pub fn g2(&self) -> DMatrix<f64> {
        self.g.columns(self.n1(), self.n2()).clone_owned()
    }

    /// `J₁`, or a zero block of the right shape when the plant has no `J`.
    pub fn j1(&self, width: usize) -> DMatrix<f64> {
        match (self.orientation(), &self.j) {
            (Orientation::Actuator, Some(j)) => j.rows(0, self.n1()).clone_owned(),
            (Orientation::Sensor, Some(j)) => j.columns(0, self.n1()).clone_owned(),
            (Orientation::Actuator, None) => DMatrix::zeros(self.n1(), width),
            (Orientation::Sensor, None) => DMatrix::zeros(width, self.n1()),
        }
    }

    pub fn j2(&self, width: usize) -> DMatrix<f64> {
        let (n1, n2) = (self.n1(), self.n2());
        match (self.orientation(), &self.j) {
            (Orientation::Actuator, Some(j)) => j.rows(n1, n2).clone_owned(),
            (Orientation::Sensor, Some(j)) => j.columns(n1, n2).clone_owned(),
            (Orientation::Actuator, None) => DMatrix::zeros(n2, width),
            (Orientation::Sensor, None) => DMatrix::zeros(width, n2),
        }
    }
}
