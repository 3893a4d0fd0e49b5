use std::sync::Arc;

use cascade_core::linalg::{eigenvalues, spectral_abscissa, vstack};
use cascade_core::lti::{exp_coefficients, hautus_detectable, hautus_stabilizable, FinitePlant, Orientation};
use cascade_core::pde::{
    augment_input_filter, dirichlet_diffusion, neumann_diffusion, wave_sensor, Operator, Realization,
    StateSpaceRealization,
};
use cascade_core::simulate::{assemble_closed_loop, integrate};
use cascade_core::sylvester::{output_times_pi, pi_times_input};
use cascade_core::synthesis::*;
use cascade_core::CoreError;
use nalgebra::DMatrix;

fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, v)
}

fn reference_gains() -> FixedGains {
    FixedGains {
        k: Some(m(1, 3, &[2.522, -1.361, -3.273])),
        l: Some(m(3, 1, &[-3.0, -1.75, -0.75])),
    }
}

fn opts() -> DesignOptions {
    DesignOptions::default()
}

#[test]
fn diffusion_pi_b_matches_reference() {
    let (pde, plant) = neumann_diffusion(200, None).unwrap();
    let law = synth_state_feedback(&plant, &pde, &LqrGains, &opts()).unwrap();
    let expected = [0.019, -0.165, 0.0];
    for i in 0..3 {
        assert!((law.pi_b[(i, 0)] - expected[i]).abs() < 5e-4, "{}", law.pi_b);
    }
    assert!(law.solution.residual < 1e-8);
}

#[test]
fn diffusion_reference_gains_stabilize() {
    let (pde, plant) = neumann_diffusion(200, None).unwrap();
    let ctrl = synth_output_feedback(&plant, &pde, &reference_gains(), &opts()).unwrap();
    assert!(ctrl.law.margin > 0.0);
    assert!(spectral_abscissa(&(&plant.e + &ctrl.l * &plant.g)).unwrap() < 0.0);
    let sys = assemble_closed_loop(&plant, &pde, Some(&ctrl.design()), 0.0).unwrap();
    let alpha = sys.spectral_abscissa().unwrap();
    assert!(alpha < 0.0, "{alpha}");
}

#[test]
fn wave_c1_pi_closed_form_and_grid() {
    let (grid, plant) = wave_sensor(128, None).unwrap();
    let obs = synth_observer(&plant, grid.as_ref(), &LqrGains, &opts()).unwrap();
    let expected = [1f64.cos(), -1f64.sin()];
    for i in 0..2 {
        assert!((obs.c1_pi[(0, i)] - expected[i]).abs() < 1e-6, "{}", obs.c1_pi);
    }
    let truncated = &grid.truncation().c * &obs.pi2;
    for i in 0..2 {
        assert!((truncated[(0, i)] - expected[i]).abs() < 5e-3, "{truncated}");
    }
    assert!(obs.triangularity_defect < 1e-9, "{}", obs.triangularity_defect);
}

/// `G(s) = 2/(s+1) − 3/(s+2) = (1 − s)/((s+1)(s+2))`, which vanishes at `s = 1`.
fn zero_at_one() -> StateSpaceRealization {
    StateSpaceRealization::new(
        "state-space",
        Operator::Dense(m(2, 2, &[-1.0, 0.0, 0.0, -2.0])),
        m(2, 1, &[1.0, 1.0]),
        m(1, 2, &[2.0, -3.0]),
    )
    .unwrap()
}

/// `G(s) = 1/(s+1)`.
fn first_order() -> StateSpaceRealization {
    StateSpaceRealization::new("state-space", Operator::Dense(m(1, 1, &[-1.0])), m(1, 1, &[1.0]), m(1, 1, &[1.0]))
        .unwrap()
}

fn scalar_plant(orientation: Orientation, e: f64, f: f64, g: f64) -> FinitePlant {
    FinitePlant::new(orientation, m(1, 1, &[e]), m(1, 1, &[f]), m(1, 1, &[g]), m(1, 1, &[0.0]), None).unwrap()
}

fn assert_infeasible<T: std::fmt::Debug>(r: Result<T, CoreError>) {
    match r {
        Err(e) => assert!(e.is_infeasible(), "{e}"),
        Ok(v) => panic!("expected an infeasible verdict, got {v:?}"),
    }
}

#[test]
fn zero_input_matrix_is_unsolvable() {
    let plant = scalar_plant(Orientation::Actuator, 1.0, 0.0, 1.0);
    assert_infeasible(synth_state_feedback(&plant, &first_order(), &LqrGains, &opts()));
}

#[test]
fn zero_output_matrix_is_unsolvable() {
    let plant = scalar_plant(Orientation::Sensor, 1.0, 1.0, 0.0);
    assert_infeasible(synth_observer(&plant, &first_order(), &LqrGains, &opts()));
}

#[test]
fn transmission_zero_defeats_both_orientations() {
    let pde = zero_at_one();
    let act = scalar_plant(Orientation::Actuator, 1.0, 1.0, 1.0);
    assert_infeasible(synth_state_feedback(&act, &pde, &LqrGains, &opts()));
    let np = act.normalize(1e-9).unwrap();
    let report = check_actuator_solvability(&np, pde.transfer(), 1e-8).unwrap();
    assert!(!report.solvable);
    let ec = exp_coefficients(np.e1()).unwrap();
    let pi_b = pi_times_input(&ec, &np.f1(), pde.transfer()).unwrap();
    assert!(!hautus_stabilizable(np.e1(), &pi_b, 1e-8).unwrap().holds);

    let sen = scalar_plant(Orientation::Sensor, 1.0, 1.0, 1.0);
    assert_infeasible(synth_observer(&sen, &pde, &LqrGains, &opts()));
    let np = sen.normalize(1e-9).unwrap();
    let c1_pi = output_times_pi(&ec, &np.g1(), pde.transfer()).unwrap();
    assert!(!hautus_detectable(&c1_pi, np.e1(), 1e-8).unwrap().holds);

    // Moving the plant pole off the zero restores solvability.
    let act = scalar_plant(Orientation::Actuator, 2.0, 1.0, 1.0);
    assert!(synth_state_feedback(&act, &pde, &LqrGains, &opts()).is_ok());
}

#[test]
fn scalar_law_is_k_times_pi() {
    // E = 1, F = C = B = 1, A = −1: Π − Π(−1) = 1 gives Π = ½ = G(1).
    let plant = scalar_plant(Orientation::Actuator, 1.0, 1.0, 1.0);
    let law = synth_state_feedback(&plant, &first_order(), &LqrGains, &opts()).unwrap();
    assert!((law.solution.pi[(0, 0)] - 0.5).abs() < 1e-14);
    assert!((law.pi_b[(0, 0)] - 0.5).abs() < 1e-14);
    assert_eq!(law.k1, law.k);
    assert!((law.k2[(0, 0)] - 0.5 * law.k[(0, 0)]).abs() < 1e-14);
    assert!(1.0 + 0.5 * law.k[(0, 0)] <= -opts().margin + 1e-9);
}

#[test]
fn stable_plant_needs_no_compensation() {
    let plant = scalar_plant(Orientation::Actuator, -1.0, 1.0, 1.0);
    let law = synth_state_feedback(&plant, &first_order(), &LqrGains, &opts()).unwrap();
    assert_eq!(law.plant.n1(), 0);
    assert_eq!(law.k1.shape(), (1, 1));
    assert_eq!(law.k1[(0, 0)], 0.0);
    assert!(law.k2.iter().all(|&x| x == 0.0));
    let sys = assemble_closed_loop(&plant, &first_order(), Some(&law.design()), 0.0).unwrap();
    assert!(sys.spectral_abscissa().unwrap() < 0.0);
}

#[test]
fn dirichlet_actuator_through_input_filter() {
    let pde: Arc<dyn Realization> = Arc::new(dirichlet_diffusion(100).unwrap());
    let plant = cascade_core::pde::diffusion::default_oscillator_plant();
    let (plant, filtered) = augment_input_filter(&plant, pde).unwrap();
    let ctrl = synth_output_feedback(&plant, &filtered, &LqrGains, &opts()).unwrap();
    assert!(ctrl.input_filter);
    assert!(ctrl.law.identity_defect() < 1e-8);
    let sys = assemble_closed_loop(&plant, &filtered, Some(&ctrl.design()), 0.0).unwrap();
    let alpha = sys.spectral_abscissa().unwrap();
    assert!(alpha < 0.0, "{alpha}");
}

#[test]
fn observer_started_on_the_state_keeps_zero_error() {
    let (grid, plant) = wave_sensor(64, None).unwrap();
    let obs = synth_observer(&plant, grid.as_ref(), &LqrGains, &opts()).unwrap();
    let mut sys = assemble_closed_loop(&plant, grid.as_ref(), Some(&obs.design()), 0.0).unwrap();
    let w0 = [-1.0, 2.0];
    let z0: Vec<f64> = (0..grid.truncation().dim()).map(|i| (i as f64 * 0.37).sin()).collect();
    sys.set_initial("w", &w0).unwrap();
    sys.set_initial("w_hat", &w0).unwrap();
    sys.set_initial("z", &z0).unwrap();
    sys.set_initial("z_hat", &z0).unwrap();
    let traj = integrate(&sys, 5.0, 0.05).unwrap();
    let peak = traj.norms("error").unwrap().into_iter().fold(0.0, f64::max);
    assert!(peak < 1e-10, "{peak:e}");
    assert!(traj.norms("w").unwrap().last().unwrap() > &0.1);
}

/// `Π_N B₁ + J₁` of the truncation. The truncated loop is triangular for
/// this product, while the gain uses the exact `ΠB₁` from the transfer.
fn truncated_bhat(law: &StateFeedbackLaw, pde: &dyn Realization) -> DMatrix<f64> {
    let np = &law.plant;
    let b1 = vstack(&np.j2(1), &pde.truncation().b);
    &law.solution.pi * b1 + np.j1(1)
}

#[test]
fn truncated_product_converges_to_the_transfer_value() {
    let mut errors = Vec::new();
    for n in [25, 50, 100] {
        let (pde, plant) = neumann_diffusion(n, None).unwrap();
        let law = synth_state_feedback(&plant, &pde, &LqrGains, &opts()).unwrap();
        errors.push((truncated_bhat(&law, &pde) - &law.bhat).norm());
    }
    assert!(errors[0] > 1.8 * errors[1] && errors[1] > 1.8 * errors[2], "{errors:?}");
    assert!(errors[2] < 5e-3, "{errors:?}");
}

#[test]
fn diagonal_state_follows_the_finite_closed_loop() {
    let (pde, plant) = neumann_diffusion(50, None).unwrap();
    let law = synth_state_feedback(&plant, &pde, &LqrGains, &opts()).unwrap();
    let mut sys = assemble_closed_loop(&plant, &pde, Some(&law.design()), 0.0).unwrap();
    let z0: Vec<f64> = (0..50).map(|i| 0.5 / (1.0 + i as f64)).collect();
    sys.set_initial("w", &[1.0, 1.0, 0.0]).unwrap();
    sys.set_initial("z", &z0).unwrap();
    let traj = integrate(&sys, 2.0, 0.01).unwrap();
    let (w, z) = (traj.signal("w").unwrap(), traj.signal("z").unwrap());
    let p = |k: usize| {
        law.diagonal_state(
            &DMatrix::from_column_slice(3, 1, w[k].as_slice()),
            &DMatrix::from_column_slice(50, 1, z[k].as_slice()),
        )
    };
    let p0 = p(0);
    let finite = law.plant.e1() + truncated_bhat(&law, &pde) * &law.k;
    for k in [100, 200] {
        let t = traj.times[k];
        let expected = (&finite * t).exp() * &p0;
        let err = (p(k) - &expected).norm() / expected.norm().max(1.0);
        assert!(err < 1e-6, "t = {t}: {err:e}");
    }
}

#[test]
fn state_feedback_spectrum_factors() {
    let (pde, plant) = neumann_diffusion(20, None).unwrap();
    let law = synth_state_feedback(&plant, &pde, &LqrGains, &opts()).unwrap();
    let sys = assemble_closed_loop(&plant, &pde, Some(&law.design()), 0.0).unwrap();
    let mut expected = eigenvalues(&(law.plant.e1() + truncated_bhat(&law, &pde) * &law.k)).unwrap();
    expected.extend(eigenvalues(&pde.truncation().a.to_dense()).unwrap());
    let mut actual = eigenvalues(&sys.matrix).unwrap();
    assert_eq!(actual.len(), expected.len());
    for z in &expected {
        let (idx, dist) = actual
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (w - z).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(dist < 1e-8 * z.norm().max(1.0), "{z}: {dist:e}");
        actual.remove(idx);
    }
}

#[test]
fn strong_slowdown_of_the_actuator() {
    let (pde, plant) = neumann_diffusion(100, None).unwrap();
    let ctrl = synth_output_feedback(&plant, &pde, &reference_gains(), &opts()).unwrap();
    let design = ctrl.design();
    assert!(matches!(
        assemble_closed_loop(&plant, &pde, Some(&design), -1.0),
        Err(CoreError::Config { .. })
    ));
    let sys = assemble_closed_loop(&plant, &pde, Some(&design), -0.9).unwrap();
    let alpha = sys.spectral_abscissa().unwrap();
    assert!(alpha < 0.0, "{alpha}");
}

#[test]
fn gains_survive_serialization() {
    let (pde, plant) = neumann_diffusion(20, None).unwrap();
    let design = synth_output_feedback(&plant, &pde, &LqrGains, &opts()).unwrap().design();
    let text = serde_json::to_string(&design).unwrap();
    let back: Design = serde_json::from_str(&text).unwrap();
    assert_eq!(back, design);
}

#[test]
fn observer_error_matrix_is_block_triangular() {
    let (grid, plant) = wave_sensor(32, None).unwrap();
    let obs = synth_observer(&plant, grid.as_ref(), &LqrGains, &opts()).unwrap();
    let again = triangularity_defect(&obs.plant, &obs.solution.pi, &obs.a_o);
    assert_eq!(again, obs.triangularity_defect);
    assert!(again < 1e-9);
    assert!(spectral_abscissa(&obs.a_o).unwrap() < 0.0);
}
