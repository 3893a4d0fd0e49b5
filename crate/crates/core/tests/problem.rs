use std::sync::Arc;

use cascade_core::config::DesignMode;
use cascade_core::linalg::spectral_abscissa;
use cascade_core::registry::StrategyFactory;
use cascade_core::simulate::assemble_closed_loop;
use cascade_core::synthesis::{Design, GainStrategy, LqrGains};
use cascade_core::{Config, CoreError, Problem, Registry, Result, Synthesis};
use nalgebra::DMatrix;

fn problem(text: &str) -> Result<Problem> {
    Problem::new(Config::from_json(text)?, &Registry::default())
}

fn config_path(err: CoreError) -> String {
    match err {
        CoreError::Config { path, .. } => path,
        e => panic!("expected a config error, got {e}"),
    }
}

#[test]
fn diffusion_output_feedback_end_to_end() {
    let p = problem(
        r#"{"orientation": "actuator", "pde": {"kind": "builtin-diffusion", "truncation": 50},
            "simulation": {"w0": [1, 1]}}"#,
    )
    .unwrap();
    assert_eq!(p.mode(), DesignMode::OutputFeedback);
    assert_eq!(p.plant.dim(), 3);
    let s = p.synthesize().unwrap();
    assert!(s.identity_defect() < 1e-8);
    let (traj, reports) = p.simulate(&s.design()).unwrap();
    assert!(traj.overflow.is_none());
    let w = reports.iter().find(|r| r.label == "w").unwrap();
    assert!(w.rate < 0.0 && w.final_ratio() < 1e-3 && w.abscissa < 0.0, "{w:?}");
}

#[test]
fn dirichlet_through_the_filter_from_config() {
    let p = problem(
        r#"{"orientation": "actuator",
            "pde": {"kind": "filter-augmented", "inner": {"kind": "builtin-dirichlet-diffusion", "truncation": 60}},
            "simulation": {"w0": [1, 0], "horizon": 15}}"#,
    )
    .unwrap();
    assert_eq!(p.appended_states, 0);
    assert_eq!(p.plant.dim(), 2);
    assert_eq!(p.pde.truncation().dim(), 61);
    let s = p.synthesize().unwrap();
    let Synthesis::OutputFeedback(ctrl) = &s else { panic!("{s:?}") };
    assert!(ctrl.input_filter);
    let (_, reports) = p.simulate(&s.design()).unwrap();
    let w = reports.iter().find(|r| r.label == "w").unwrap();
    assert!(w.final_ratio() < 1e-3, "{w:?}");
}

#[test]
fn explicit_state_space_sensor() {
    let p = problem(
        r#"{"orientation": "sensor",
            "plant": {"E": [[0, 1], [-1, 0]], "F": [[0], [1]], "G": [[1, 0]]},
            "pde": {"kind": "grid", "params": {"A": [[-1, 0], [1, -2]], "B": [[1], [0]], "C": [[0, 1]]}},
            "simulation": {"w0": [1, -1], "forcing": {"kind": "sine", "amplitude": 1, "frequency": 2}}}"#,
    )
    .unwrap();
    let s = p.synthesize().unwrap();
    let Synthesis::Observer(obs) = &s else { panic!() };
    assert!(obs.triangularity_defect < 1e-9);
    assert!(spectral_abscissa(&obs.a_o).unwrap() < 0.0);
    let (_, reports) = p.simulate(&s.design()).unwrap();
    let e = reports.iter().find(|r| r.label == "error_w").unwrap();
    assert!(e.final_ratio() < 1e-3, "{e:?}");
}

#[test]
fn fixed_gains_are_checked() {
    let base = r#"{"orientation": "actuator", "pde": {"kind": "builtin-diffusion", "truncation": 20},
                   "design": {"strategy": "fixed", "fixed": FIXED}}"#;
    let missing = problem(&base.replace("FIXED", r#"{"L": [[-3], [-1.75], [-0.75]]}"#)).unwrap();
    assert_eq!(config_path(missing.synthesize().unwrap_err()), "design.fixed.K");
    let shape = problem(&base.replace("FIXED", r#"{"K": [[1, 2]], "L": [[-3], [-1.75], [-0.75]]}"#)).unwrap();
    assert_eq!(config_path(shape.synthesize().unwrap_err()), "design.fixed.K");
    let flipped = problem(&base.replace("FIXED", r#"{"K": [[-2.522, 1.361, 3.273]], "L": [[-3], [-1.75], [-0.75]]}"#))
        .unwrap();
    assert!(flipped.synthesize().unwrap_err().is_infeasible());
}

#[test]
fn malformed_inputs_name_their_field() {
    let bad_plant = problem(
        r#"{"orientation": "actuator", "plant": {"E": [[1, 0], [0, 1]], "F": [[1]], "G": [[1, 0]]},
            "pde": {"kind": "grid", "params": {"A": [[-1]], "B": [[1]], "C": [[1]]}}}"#,
    )
    .unwrap_err();
    assert_eq!(config_path(bad_plant), "plant");
    let bad_w0 = problem(
        r#"{"orientation": "actuator", "pde": {"kind": "builtin-diffusion", "truncation": 10},
            "simulation": {"w0": [1]}}"#,
    )
    .unwrap();
    let design = bad_w0.synthesize().unwrap().design();
    assert_eq!(config_path(bad_w0.simulate(&design).unwrap_err()), "simulation.w0");
    let missing_modes = problem(r#"{"orientation": "actuator", "pde": {"kind": "modal"}}"#).unwrap_err();
    assert_eq!(config_path(missing_modes), "pde.params.modes");
    let zero = problem(r#"{"orientation": "actuator", "pde": {"kind": "builtin-diffusion", "truncation": 0}}"#)
        .unwrap_err();
    assert_eq!(config_path(zero), "pde.truncation");
    let wrong_side = problem(r#"{"orientation": "actuator", "pde": {"kind": "builtin-wave"}}"#).unwrap_err();
    assert_eq!(config_path(wrong_side), "orientation");
}

#[test]
fn unstable_pde_is_rejected() {
    let p = problem(
        r#"{"orientation": "actuator", "plant": {"E": [[1]], "F": [[1]], "G": [[1]]},
            "pde": {"kind": "grid", "params": {"A": [[0.5]], "B": [[1]], "C": [[1]]}}}"#,
    )
    .unwrap();
    let err = p.synthesize().unwrap_err();
    assert!(matches!(err, CoreError::NotExponentiallyStable { .. }), "{err}");
    assert!(err.is_infeasible());
}

#[test]
fn observer_sweep_is_a_config_error() {
    let p = problem(r#"{"orientation": "sensor", "pde": {"kind": "builtin-wave", "truncation": 16}}"#).unwrap();
    let design = p.synthesize().unwrap().design();
    assert!(matches!(p.sweep(&design), Err(CoreError::Config { .. })));
}

/// LQR with twice the configured margin, registered under its own name.
#[derive(Debug)]
struct Aggressive;

impl GainStrategy for Aggressive {
    fn name(&self) -> &str {
        "aggressive"
    }

    fn stabilizing(&self, e1: &DMatrix<f64>, bhat: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
        LqrGains.stabilizing(e1, bhat, 2.0 * margin)
    }

    fn injection(&self, c: &DMatrix<f64>, e1: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
        LqrGains.injection(c, e1, 2.0 * margin)
    }
}

struct AggressiveFactory;

impl StrategyFactory for AggressiveFactory {
    fn name(&self) -> &str {
        "aggressive"
    }

    fn build(&self, _: &Config) -> Result<Box<dyn GainStrategy>> {
        Ok(Box::new(Aggressive))
    }
}

#[test]
fn strategies_are_selected_by_name() {
    let text = r#"{"orientation": "actuator", "pde": {"kind": "builtin-diffusion", "truncation": 20},
                   "design": {"mode": "state-feedback", "strategy": "aggressive"}}"#;
    let cfg = Config::from_json(text).unwrap();
    assert!(matches!(
        Problem::new(cfg.clone(), &Registry::default()),
        Err(CoreError::Unknown { .. })
    ));
    let mut registry = Registry::default();
    registry.register_strategy(Arc::new(AggressiveFactory));
    let p = Problem::new(cfg, &registry).unwrap();
    assert_eq!(p.strategy.name(), "aggressive");
    let Synthesis::StateFeedback(law) = p.synthesize().unwrap() else { panic!() };
    assert!(law.margin >= 2.0 * p.config.design.margin - 1e-9);
    let Design::StateFeedback { .. } = law.design() else { panic!() };
    let sys = assemble_closed_loop(&p.plant, p.pde.as_ref(), Some(&law.design()), 0.0).unwrap();
    assert!(sys.spectral_abscissa().unwrap() < 0.0);
}

#[test]
fn config_round_trips_through_json() {
    let text = r#"{"orientation": "sensor", "pde": {"kind": "builtin-wave", "truncation": 32},
                   "plant": {"Gbar": [[1, 0]]},
                   "design": {"strategy": "fixed", "fixed": {"L": [[-2.462], [1.984]]}},
                   "simulation": {"forcing": {"kind": "sine", "amplitude": 1, "frequency": 5}},
                   "sweep": {"min": -0.2, "max": 0.2, "steps": 5}}"#;
    let cfg = Config::from_json(text).unwrap();
    assert_eq!(Config::from_json(&cfg.to_json()).unwrap(), cfg);
}
