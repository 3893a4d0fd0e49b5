use cascade_core::lti::{FinitePlant, Orientation};
use cascade_core::pde::{Operator, StateSpaceRealization};
use cascade_core::simulate::{assemble_closed_loop, delta_sweep, fit_decay_rate, integrate, Forcing, SweepGrid};
use cascade_core::synthesis::Design;
use cascade_core::CoreError;
use nalgebra::DMatrix;

fn s(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

/// `w' = w + z`, `z' = −z + u`. With `Π = ½` the law `K = −4` places
/// `E + ΠBK` at `−1`, so `K₁ = −4`, `K₂ = KΠ = −2`.
fn scalar_cascade() -> (FinitePlant, StateSpaceRealization, Design) {
    let plant = FinitePlant::new(Orientation::Actuator, s(1.0), s(1.0), s(1.0), s(0.0), None).unwrap();
    let pde = StateSpaceRealization::new("state-space", Operator::Dense(s(-1.0)), s(1.0), s(1.0)).unwrap();
    let design = Design::StateFeedback { k1: s(-4.0), k2: s(-2.0) };
    (plant, pde, design)
}

#[test]
fn perturbed_loop_matches_hand_assembly() {
    let (plant, pde, design) = scalar_cascade();
    let sys = assemble_closed_loop(&plant, &pde, Some(&design), 0.25).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -4.0, -1.25 - 2.0]);
    assert_eq!(sys.matrix, expected);
}

#[test]
fn sweep_finds_the_analytic_boundary() {
    // M(δ) = [[1, 1], [−4, −3 − δ]]: trace −2 − δ, determinant 1 − δ, so the
    // loop is stable exactly for δ < 1.
    let (plant, pde, design) = scalar_cascade();
    let grid = SweepGrid {
        min: -0.5,
        max: 2.0,
        steps: 11,
        refine: 1e-4,
    };
    let report = delta_sweep(&plant, &pde, &design, &grid).unwrap();
    let iv = report.interval.unwrap();
    assert!(iv.lower_censored && !iv.upper_censored);
    assert_eq!(iv.lower, -0.5);
    assert!(iv.upper <= 1.0 && iv.upper > 1.0 - 1e-4, "{}", iv.upper);
    assert!(report.points.iter().any(|p| p.refined));
    assert!(report.points.windows(2).all(|w| w[0].delta <= w[1].delta));
}

#[test]
fn single_point_sweep() {
    let (plant, pde, design) = scalar_cascade();
    let grid = SweepGrid {
        min: 0.0,
        max: 0.0,
        steps: 1,
        refine: 1e-3,
    };
    let report = delta_sweep(&plant, &pde, &design, &grid).unwrap();
    assert_eq!(report.points.len(), 1);
    let iv = report.interval.unwrap();
    assert_eq!((iv.lower, iv.upper, iv.width()), (0.0, 0.0, 0.0));
}

#[test]
fn unstable_nominal_loop_has_no_interval() {
    let (plant, pde, _) = scalar_cascade();
    let flipped = Design::StateFeedback { k1: s(4.0), k2: s(2.0) };
    let report = delta_sweep(&plant, &pde, &flipped, &SweepGrid::default()).unwrap();
    assert!(report.interval.is_none());
    assert!(report.points.iter().all(|p| !p.refined));
}

#[test]
fn observer_designs_are_not_swept() {
    let plant = FinitePlant::new(Orientation::Sensor, s(1.0), s(1.0), s(1.0), s(0.0), None).unwrap();
    let pde = StateSpaceRealization::new("state-space", Operator::Dense(s(-1.0)), s(1.0), s(1.0)).unwrap();
    let design = Design::Observer { ltilde: s(-3.0), pi2l: s(-1.0) };
    assert!(matches!(
        delta_sweep(&plant, &pde, &design, &SweepGrid::default()),
        Err(CoreError::Config { .. })
    ));
}

#[test]
fn zero_initial_state_stays_at_rest() {
    let (plant, pde, design) = scalar_cascade();
    let sys = assemble_closed_loop(&plant, &pde, Some(&design), 0.0).unwrap();
    let traj = integrate(&sys, 5.0, 0.1).unwrap();
    assert!(traj.states.iter().all(|x| x.iter().all(|&v| v == 0.0)));
    assert!(matches!(fit_decay_rate(&traj, "w"), Err(CoreError::DegenerateTrajectory(_))));
}

#[test]
fn closed_loop_decays_at_the_slowest_eigenvalue() {
    // Eigenvalues of [[1, 1], [−4, −3]] are both −1 (a Jordan pair).
    let (plant, pde, design) = scalar_cascade();
    let mut sys = assemble_closed_loop(&plant, &pde, Some(&design), 0.0).unwrap();
    sys.set_initial("w", &[1.0]).unwrap();
    let traj = integrate(&sys, 30.0, 0.01).unwrap();
    let rep = fit_decay_rate(&traj, "w").unwrap();
    assert!((rep.rate + 1.0).abs() < 0.1, "{}", rep.rate);
    assert!((rep.abscissa + 1.0).abs() < 1e-6);
    assert!(rep.final_ratio() < 1e-10);
}

#[test]
fn forcing_drives_the_pde_input() {
    let (plant, pde, design) = scalar_cascade();
    let forcing = Forcing::Polynomial { coefficients: vec![1.0, -0.5] };
    let sys = assemble_closed_loop(&plant, &pde, Some(&design), 0.0)
        .unwrap()
        .with_forcing(&forcing, 0)
        .unwrap();
    let traj = integrate(&sys, 2.0, 0.1).unwrap();
    let f = traj.signal("forcing").unwrap();
    for (t, v) in traj.times.iter().zip(&f) {
        assert!((v[0] - (1.0 - 0.5 * t)).abs() < 1e-10, "t = {t}");
    }
    assert!(traj.norms("w").unwrap().last().unwrap() > &0.0);
}

#[test]
fn csv_has_a_fixed_header() {
    let (plant, pde, design) = scalar_cascade();
    let mut sys = assemble_closed_loop(&plant, &pde, Some(&design), 0.0).unwrap();
    sys.set_initial("w", &[1.0]).unwrap();
    let traj = integrate(&sys, 0.2, 0.1).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,w[0],z[0],y[0],u[0]");
    assert_eq!(lines.count(), 3);
}

#[test]
fn perturbation_at_or_below_minus_one_is_rejected() {
    let (plant, pde, design) = scalar_cascade();
    for delta in [-1.0, -2.0, f64::NAN] {
        assert!(assemble_closed_loop(&plant, &pde, Some(&design), delta).is_err(), "{delta}");
    }
}
