use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::linalg::{
    cluster_eigenvalues, cluster_tolerance, complexify, eigenvalues, frobenius, min_singular_row_rank,
    null_space, C64,
};
use crate::lti::{NormalizedPlant, Orientation};
use crate::pde::TransferOracle;

/// Default relative cutoff for the transfer conditions.
pub const DEFAULT_SOLVABILITY_TOLERANCE: f64 = 1e-8;

/// Which nonvanishing condition a report checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `vᵀF₁G(λ) ≠ 0` for every left eigenvector `v` of `E₁`.
    ActuatorTransfer,
    /// `vᵀF₁G(λ) + vᵀJ₁ ≠ 0`.
    ActuatorTransferWithDirectInput,
    /// `G(λ)G₁v ≠ 0` for every right eigenvector `v` of `E₁`.
    SensorTransfer,
    /// `G(λ)G₁v + J₁v ≠ 0`.
    SensorTransferWithDirectOutput,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::ActuatorTransfer => "actuator-transfer",
            Condition::ActuatorTransferWithDirectInput => "actuator-transfer-with-direct-input",
            Condition::SensorTransfer => "sensor-transfer",
            Condition::SensorTransferWithDirectOutput => "sensor-transfer-with-direct-output",
        }
    }
}

/// The condition evaluated on one eigenvalue cluster of `E₁`.
#[derive(Debug, Clone)]
pub struct EigenRecord {
    pub eigenvalue: C64,
    /// Orthonormal basis of the (left or right) eigenspace, one column each.
    pub eigenvectors: DMatrix<C64>,
    /// `VᵀM` (actuator) or `MV` (sensor), where `M` is the transfer term.
    pub test_value: DMatrix<C64>,
    /// Smallest singular value of the test value in the direction of the
    /// eigenspace; zero means some eigenvector is annihilated.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct SolvabilityReport {
    pub condition: Condition,
    pub solvable: bool,
    pub threshold: f64,
    pub records: Vec<EigenRecord>,
}

impl SolvabilityReport {
    pub fn min_margin(&self) -> f64 {
        self.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    /// The `NotSolvable` error for the weakest eigenvalue, if the check failed.
    pub fn failure(&self) -> Option<CoreError> {
        if self.solvable {
            return None;
        }
        let worst = self.records.iter().min_by(|a, b| a.margin.total_cmp(&b.margin))?;
        Some(CoreError::NotSolvable {
            eigenvalue: worst.eigenvalue,
            margin: worst.margin,
            threshold: self.threshold,
        })
    }

    /// Largest relative mismatch between the eigenvector projections of the
    /// finite product (`ΠB₁ + J₁` or `C₁Π + J₁`) and the recorded transfer
    /// test values, which agree in exact arithmetic.
    pub fn identity_defect(&self, product: &DMatrix<f64>) -> f64 {
        let p = complexify(product);
        let sensor = matches!(
            self.condition,
            Condition::SensorTransfer | Condition::SensorTransferWithDirectOutput
        );
        self.records
            .iter()
            .map(|r| {
                let projected = if sensor {
                    &p * &r.eigenvectors
                } else {
                    r.eigenvectors.transpose() * &p
                };
                frobenius(&(projected - &r.test_value)) / frobenius(&r.test_value).max(1.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Cluster means of `σ(E₁)` ordered by real, then imaginary part.
fn eigen_clusters(e1: &DMatrix<f64>) -> Result<Vec<C64>> {
    let eigs = eigenvalues(e1)?;
    let mut centers: Vec<C64> = cluster_eigenvalues(&eigs, cluster_tolerance(e1))
        .into_iter()
        .map(|c| c.center)
        .collect();
    crate::linalg::sort_eigenvalues(&mut centers);
    Ok(centers)
}

fn eigenspace_tolerance(e1: &DMatrix<f64>) -> f64 {
    1e-6 * frobenius(e1).max(1.0)
}

fn transfer_at(transfer: &dyn TransferOracle, lam: C64) -> Result<DMatrix<C64>> {
    let abscissa = transfer.domain_abscissa();
    if !(lam.re > abscissa) {
        return Err(CoreError::TransferUndefinedAtEigenvalue {
            eigenvalue: lam,
            abscissa,
        });
    }
    transfer.eval(lam)
}

/// Evaluates the actuator condition at every eigenvalue of `E₁`, using left
/// eigenvectors. The threshold is `tol·max(1, ‖F₁‖·max|G(λ)| + ‖J₁‖)`, so a
/// transfer that vanishes on the whole spectrum is still caught.
pub fn check_actuator_solvability(
    plant: &NormalizedPlant,
    transfer: &dyn TransferOracle,
    tol: f64,
) -> Result<SolvabilityReport> {
    if plant.orientation() != Orientation::Actuator {
        return Err(CoreError::config("orientation", "actuator check on a sensor plant"));
    }
    let e1 = plant.e1();
    let n1 = e1.nrows();
    let f1 = plant.f1();
    let j1 = plant.j1(transfer.inputs());
    let condition = if plant.j.is_some() {
        Condition::ActuatorTransferWithDirectInput
    } else {
        Condition::ActuatorTransfer
    };
    let (f1c, j1c) = (complexify(&f1), complexify(&j1));
    let e1c = complexify(e1);
    let mut records = Vec::new();
    let mut gmax: f64 = 0.0;
    for lam in eigen_clusters(e1)? {
        let g = transfer_at(transfer, lam)?;
        gmax = gmax.max(frobenius(&g));
        let shifted = (DMatrix::<C64>::identity(n1, n1) * lam - &e1c).transpose();
        let v = null_space(&shifted, eigenspace_tolerance(e1), 1);
        let test_value = v.transpose() * (&f1c * g + &j1c);
        records.push(EigenRecord {
            eigenvalue: lam,
            margin: min_singular_row_rank(&test_value),
            eigenvectors: v,
            test_value,
        });
    }
    let threshold = tol * (frobenius(&f1) * gmax + frobenius(&j1)).max(1.0);
    let solvable = records.iter().all(|r| r.margin > threshold);
    Ok(SolvabilityReport {
        condition,
        solvable,
        threshold,
        records,
    })
}

/// Dual of [`check_actuator_solvability`] with right eigenvectors.
pub fn check_sensor_solvability(
    plant: &NormalizedPlant,
    transfer: &dyn TransferOracle,
    tol: f64,
) -> Result<SolvabilityReport> {
    if plant.orientation() != Orientation::Sensor {
        return Err(CoreError::config("orientation", "sensor check on an actuator plant"));
    }
    let e1 = plant.e1();
    let n1 = e1.nrows();
    let g1 = plant.g1();
    let j1 = plant.j1(transfer.outputs());
    let condition = if plant.j.is_some() {
        Condition::SensorTransferWithDirectOutput
    } else {
        Condition::SensorTransfer
    };
    let (g1c, j1c) = (complexify(&g1), complexify(&j1));
    let e1c = complexify(e1);
    let mut records = Vec::new();
    let mut gmax: f64 = 0.0;
    for lam in eigen_clusters(e1)? {
        let g = transfer_at(transfer, lam)?;
        gmax = gmax.max(frobenius(&g));
        let shifted = DMatrix::<C64>::identity(n1, n1) * lam - &e1c;
        let v = null_space(&shifted, eigenspace_tolerance(e1), 1);
        let test_value = (g * &g1c + &j1c) * &v;
        records.push(EigenRecord {
            eigenvalue: lam,
            margin: min_singular_row_rank(&test_value.transpose()),
            eigenvectors: v,
            test_value,
        });
    }
    let threshold = tol * (frobenius(&g1) * gmax + frobenius(&j1)).max(1.0);
    let solvable = records.iter().all(|r| r.margin > threshold);
    Ok(SolvabilityReport {
        condition,
        solvable,
        threshold,
        records,
    })
}
