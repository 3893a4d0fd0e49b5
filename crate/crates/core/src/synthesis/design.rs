use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::solvability::{check_actuator_solvability, check_sensor_solvability, SolvabilityReport};
use super::strategy::GainStrategy;
use super::DesignOptions;
use crate::error::{CoreError, Result};
use crate::linalg::{block_diag, frobenius, hstack, vstack};
use crate::lti::{exp_coefficients, verify_hurwitz, FinitePlant, NormalizedPlant, Orientation};
use crate::pde::Realization;
use crate::sylvester::{
    actuator_system, output_times_pi, pi_times_input, sensor_system, solve_actuator_pi, solve_sensor_pi,
    SylvesterSolution,
};

/// Gains of a synthesized design in the original plant coordinates, as
/// stored in a gains file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Design {
    /// `u = K₁w + K₂z`.
    StateFeedback {
        #[serde(with = "crate::serde_rows")]
        k1: DMatrix<f64>,
        #[serde(with = "crate::serde_rows")]
        k2: DMatrix<f64>,
    },
    /// Controller driven by `y` with injection gain `L`.
    OutputFeedback {
        #[serde(with = "crate::serde_rows")]
        k1: DMatrix<f64>,
        #[serde(with = "crate::serde_rows")]
        k2: DMatrix<f64>,
        #[serde(with = "crate::serde_rows")]
        l: DMatrix<f64>,
    },
    /// Observer with injections `L̃` into the plant copy and `Π₂L` into the
    /// PDE copy.
    Observer {
        #[serde(with = "crate::serde_rows")]
        ltilde: DMatrix<f64>,
        #[serde(with = "crate::serde_rows")]
        pi2l: DMatrix<f64>,
    },
}

impl Design {
    pub fn mode(&self) -> &'static str {
        match self {
            Design::StateFeedback { .. } => "state-feedback",
            Design::OutputFeedback { .. } => "output-feedback",
            Design::Observer { .. } => "observer",
        }
    }

    pub fn orientation(&self) -> Orientation {
        match self {
            Design::Observer { .. } => Orientation::Sensor,
            _ => Orientation::Actuator,
        }
    }
}

/// `u = Kw₁ + KΠ[w₂; z]`, rewritten as `u = K₁w + K₂z`.
#[derive(Debug, Clone)]
pub struct StateFeedbackLaw {
    pub plant: NormalizedPlant,
    pub report: SolvabilityReport,
    pub solution: SylvesterSolution,
    /// `ΠB₁` from the transfer function.
    pub pi_b: DMatrix<f64>,
    /// `ΠB₁ + J₁`.
    pub bhat: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    /// `−α(E₁ + B̂K)`.
    pub margin: f64,
}

impl StateFeedbackLaw {
    /// `vᵀΠB₁` against `vᵀF₁G(λ)` over the left eigenvectors of `E₁`.
    pub fn identity_defect(&self) -> f64 {
        self.report.identity_defect(&self.bhat)
    }

    pub fn design(&self) -> Design {
        Design::StateFeedback {
            k1: self.k1.clone(),
            k2: self.k2.clone(),
        }
    }

    /// `p₁ = w₁ + Π[w₂; z]` for a state in original coordinates.
    pub fn diagonal_state(&self, w: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let wbar = &self.plant.split.t_inv * w;
        let n1 = self.plant.n1();
        let rest = vstack(&wbar.rows(n1, self.plant.n2()).clone_owned(), z);
        wbar.rows(0, n1) + &self.solution.pi * rest
    }
}

/// Controller `(A_c, B_c, C_c, 0)` on the state `[w̃; z̃]`.
#[derive(Debug, Clone)]
pub struct ControllerRealization {
    pub law: StateFeedbackLaw,
    pub l1: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
    pub c_c: DMatrix<f64>,
    pub d_c: DMatrix<f64>,
    /// `−α(E₁ + L₁G₁)`.
    pub injection_margin: f64,
    /// The plant has a direct input `J`.
    pub direct_input: bool,
    /// The PDE block carries a first-order input filter.
    pub input_filter: bool,
}

impl ControllerRealization {
    pub fn design(&self) -> Design {
        Design::OutputFeedback {
            k1: self.law.k1.clone(),
            k2: self.law.k2.clone(),
            l: self.l.clone(),
        }
    }
}

/// Observer `[ŵ; ẑ]' = A_o[ŵ; ẑ] + input_map·u + injection·y`. The
/// estimation error obeys `e' = A_o e`.
#[derive(Debug, Clone)]
pub struct ObserverRealization {
    pub plant: NormalizedPlant,
    pub report: SolvabilityReport,
    pub solution: SylvesterSolution,
    /// `C₁Π` from the transfer function.
    pub c1_pi: DMatrix<f64>,
    /// `C₁Π + J₁`.
    pub chat: DMatrix<f64>,
    pub l: DMatrix<f64>,
    /// `T[L; Π₁L]`.
    pub ltilde: DMatrix<f64>,
    pub pi1: DMatrix<f64>,
    pub pi2: DMatrix<f64>,
    pub pi2l: DMatrix<f64>,
    pub a_o: DMatrix<f64>,
    pub injection: DMatrix<f64>,
    pub input_map: DMatrix<f64>,
    /// `−α(E₁ + L(C₁Π + J₁))`.
    pub margin: f64,
    /// Largest coupling from `e_w₁` into `[e_w₂; e_z] − Πe_w₁`.
    pub triangularity_defect: f64,
    pub direct_output: bool,
}

impl ObserverRealization {
    /// `C₁Πv` against `G(λ)G₁v` over the right eigenvectors of `E₁`.
    pub fn identity_defect(&self) -> f64 {
        self.report.identity_defect(&self.chat)
    }

    pub fn design(&self) -> Design {
        Design::Observer {
            ltilde: self.ltilde.clone(),
            pi2l: self.pi2l.clone(),
        }
    }
}

fn prepare(plant: &FinitePlant, pde: &dyn Realization, orientation: Orientation, opts: &DesignOptions) -> Result<NormalizedPlant> {
    if plant.orientation != orientation {
        return Err(CoreError::config(
            "orientation",
            format!("design needs a {} cascade", orientation.as_str()),
        ));
    }
    plant.check_interface(pde.inputs(), pde.outputs())?;
    if !pde.exp_stable() {
        return Err(CoreError::NotExponentiallyStable {
            growth_bound: pde.growth_bound(),
        });
    }
    plant.normalize(opts.split_tolerance)
}

/// State feedback through `Π` of the actuator cascade.
pub fn synth_state_feedback(
    plant: &FinitePlant,
    pde: &dyn Realization,
    strategy: &dyn GainStrategy,
    opts: &DesignOptions,
) -> Result<StateFeedbackLaw> {
    let np = prepare(plant, pde, Orientation::Actuator, opts)?;
    let report = check_actuator_solvability(&np, pde.transfer(), opts.solvability_tolerance)?.into_result()?;
    let (e1, f1) = (np.e1(), np.f1());
    let ec = exp_coefficients(e1)?;
    let (a1, c1) = actuator_system(&np, pde.truncation());
    let mut solution = solve_actuator_pi(e1, &f1, &a1, &c1, &ec)?;
    let pi_b = pi_times_input(&ec, &f1, pde.transfer())?;
    solution.product = Some(pi_b.clone());
    let bhat = &pi_b + np.j1(pde.inputs());
    let k = strategy.stabilizing(e1, &bhat, opts.margin)?;
    let margin = -verify_hurwitz(&(e1 + &bhat * &k))?;
    let (pi_w2, pi_z) = solution.actuator_blocks(np.n2());
    let k1 = hstack(&k, &(&k * pi_w2)) * &np.split.t_inv;
    let k2 = &k * pi_z;
    Ok(StateFeedbackLaw {
        plant: np,
        report,
        solution,
        pi_b,
        bhat,
        k,
        k1,
        k2,
        margin,
    })
}

fn zeros_or(j: &Option<DMatrix<f64>>, rows: usize, cols: usize) -> DMatrix<f64> {
    j.clone().unwrap_or_else(|| DMatrix::zeros(rows, cols))
}

/// Observer-based output feedback: the state feedback law applied to the
/// state of a plant-plus-PDE copy corrected by `L(ŷ − y)`.
pub fn synth_output_feedback(
    plant: &FinitePlant,
    pde: &dyn Realization,
    strategy: &dyn GainStrategy,
    opts: &DesignOptions,
) -> Result<ControllerRealization> {
    let law = synth_state_feedback(plant, pde, strategy, opts)?;
    let np = &law.plant;
    let n2 = np.n2();
    let g1 = np.g1();
    let l1 = strategy.injection(&g1, np.e1(), opts.injection_margin)?;
    let injection_margin = -verify_hurwitz(&(np.e1() + &l1 * &g1))?;
    let l = &np.split.t * vstack(&l1, &DMatrix::zeros(n2, l1.ncols()));

    let tr = pde.truncation();
    let a = tr.a.to_dense();
    let j = zeros_or(&plant.j, plant.dim(), pde.inputs());
    let a11 = &plant.e + &l * &plant.g + &j * &law.k1;
    let a12 = (&plant.f + &l * &plant.h) * &tr.c + &j * &law.k2;
    let a21 = &tr.b * &law.k1;
    let a22 = &a + &tr.b * &law.k2;
    let a_c = vstack(&hstack(&a11, &a12), &hstack(&a21, &a22));
    let b_c = vstack(&(-&l), &DMatrix::zeros(tr.dim(), l.ncols()));
    let c_c = hstack(&law.k1, &law.k2);
    let d_c = DMatrix::zeros(c_c.nrows(), b_c.ncols());
    Ok(ControllerRealization {
        direct_input: plant.j.is_some(),
        input_filter: pde.kind() == "filter-augmented",
        law,
        l1,
        l,
        a_c,
        b_c,
        c_c,
        d_c,
        injection_margin,
    })
}

/// Cascade observer for the sensor cascade.
pub fn synth_observer(
    plant: &FinitePlant,
    pde: &dyn Realization,
    strategy: &dyn GainStrategy,
    opts: &DesignOptions,
) -> Result<ObserverRealization> {
    let np = prepare(plant, pde, Orientation::Sensor, opts)?;
    let report = check_sensor_solvability(&np, pde.transfer(), opts.solvability_tolerance)?.into_result()?;
    let (e1, g1) = (np.e1(), np.g1());
    let ec = exp_coefficients(e1)?;
    let tr = pde.truncation();
    let (a1, b1) = sensor_system(&np, tr);
    let mut solution = solve_sensor_pi(e1, &g1, &a1, &b1, &ec)?;
    let c1_pi = output_times_pi(&ec, &g1, pde.transfer())?;
    solution.product = Some(c1_pi.clone());
    let chat = &c1_pi + np.j1(pde.outputs());
    let l = strategy.injection(&chat, e1, opts.injection_margin)?;
    let margin = -verify_hurwitz(&(e1 + &l * &chat))?;
    let (pi1, pi2) = solution.sensor_blocks(np.n2());
    let ltilde = &np.split.t * vstack(&l, &(&pi1 * &l));
    let pi2l = &pi2 * &l;

    let j = zeros_or(&plant.j, pde.outputs(), plant.dim());
    let a = tr.a.to_dense();
    let a11 = &plant.e + &ltilde * &j;
    let a12 = &ltilde * &tr.c;
    let a21 = &tr.b * &plant.g + &pi2l * &j;
    let a22 = &a + &pi2l * &tr.c;
    let a_o = vstack(&hstack(&a11, &a12), &hstack(&a21, &a22));
    let injection = -vstack(&ltilde, &pi2l);
    let input_map = vstack(&plant.f, &(&tr.b * &plant.h));
    let triangularity_defect = triangularity_defect(&np, &solution.pi, &a_o);
    Ok(ObserverRealization {
        direct_output: plant.j.is_some(),
        plant: np,
        report,
        solution,
        c1_pi,
        chat,
        l,
        ltilde,
        pi1,
        pi2,
        pi2l,
        a_o,
        injection,
        input_map,
        margin,
        triangularity_defect,
    })
}

/// Moves the error matrix to `(e_w₁, [e_w₂; e_z] − Πe_w₁)` and returns the
/// norm of the block coupling `e_w₁` into the second group, relative to the
/// norm of the transformed matrix.
pub fn triangularity_defect(np: &NormalizedPlant, pi: &DMatrix<f64>, error_matrix: &DMatrix<f64>) -> f64 {
    let n = np.split.t.nrows();
    let total = error_matrix.nrows();
    let n1 = np.n1();
    let rest = total - n1;
    let eye = DMatrix::identity(total - n, total - n);
    let p = block_diag(&np.split.t_inv, &eye);
    let p_inv = block_diag(&np.split.t, &eye);
    let split = &p * error_matrix * &p_inv;
    // S = [I 0; −Π I], S⁻¹ = [I 0; Π I]
    let mut s = DMatrix::identity(total, total);
    let mut s_inv = DMatrix::identity(total, total);
    s.view_mut((n1, 0), (rest, n1)).copy_from(&(-pi));
    s_inv.view_mut((n1, 0), (rest, n1)).copy_from(pi);
    let m = &s * split * &s_inv;
    frobenius(&m.view((n1, 0), (rest, n1)).clone_owned()) / frobenius(&m).max(1.0)
}
