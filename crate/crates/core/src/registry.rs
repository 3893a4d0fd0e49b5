//! Name-keyed factories for PDE realizations and gain strategies, and the
//! [`Problem`] they assemble from a [`Config`].

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::config::{matrix, param, required_matrix, Config, DesignMode, PdeSpec, PlantSpec};
use crate::error::{CoreError, Result};
use crate::lti::{FinitePlant, Orientation};
use crate::pde::diffusion::default_oscillator_plant;
use crate::pde::{
    augment_input_filter, dirichlet_diffusion, neumann_diffusion, wave_sensor, Mode, ModalRealization, ModeSource,
    Operator, Realization, StateSpaceRealization, WaveBasePlant,
};
use crate::simulate::{
    assemble_closed_loop, delta_sweep, fit_decay_rate, integrate, ClosedLoopSystem, DecayReport, SweepReport,
    Trajectory,
};
use crate::sylvester::SylvesterSolution;
use crate::synthesis::{
    check_actuator_solvability, check_sensor_solvability, synth_observer, synth_output_feedback,
    synth_state_feedback, ControllerRealization, Design, FixedGains, GainStrategy, LqrGains, ObserverRealization,
    SolvabilityReport, StateFeedbackLaw,
};

/// A realization together with the plant it is cascaded with.
#[derive(Debug, Clone)]
pub struct Built {
    pub pde: Arc<dyn Realization>,
    pub plant: FinitePlant,
    /// Plant coordinates appended by the builtin (zero initial value).
    pub appended_states: usize,
    /// Set by the wave builtin, whose plant went through a change of
    /// variables.
    pub wave_base: Option<WaveBasePlant>,
}

/// Builds one kind of PDE realization.
pub trait RealizationFactory: Send + Sync {
    fn kind(&self) -> &str;
    fn build(&self, registry: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built>;
}

/// Builds one kind of gain strategy.
pub trait StrategyFactory: Send + Sync {
    fn name(&self) -> &str;
    fn build(&self, cfg: &Config) -> Result<Box<dyn GainStrategy>>;
}

pub struct Registry {
    realizations: BTreeMap<String, Arc<dyn RealizationFactory>>,
    strategies: BTreeMap<String, Arc<dyn StrategyFactory>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register_realization(Arc::new(ModalFactory));
        let grid: Arc<dyn RealizationFactory> = Arc::new(StateSpaceFactory);
        r.register_realization(grid.clone());
        r.realizations.insert("state-space".into(), grid);
        r.register_realization(Arc::new(DiffusionFactory));
        r.register_realization(Arc::new(DirichletFactory));
        r.register_realization(Arc::new(WaveFactory));
        r.register_realization(Arc::new(FilterFactory));
        r.register_strategy(Arc::new(LqrFactory));
        r.register_strategy(Arc::new(FixedFactory));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            realizations: BTreeMap::new(),
            strategies: BTreeMap::new(),
        }
    }

    pub fn register_realization(&mut self, f: Arc<dyn RealizationFactory>) {
        self.realizations.insert(f.kind().to_string(), f);
    }

    pub fn register_strategy(&mut self, f: Arc<dyn StrategyFactory>) {
        self.strategies.insert(f.name().to_string(), f);
    }

    pub fn realization_kinds(&self) -> Vec<&str> {
        self.realizations.keys().map(String::as_str).collect()
    }

    pub fn strategy_names(&self) -> Vec<&str> {
        self.strategies.keys().map(String::as_str).collect()
    }

    pub fn build_realization(&self, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        let f = self.realizations.get(&spec.kind).ok_or_else(|| CoreError::Unknown {
            what: "PDE kind",
            name: spec.kind.clone(),
        })?;
        f.build(self, cfg, spec, path)
    }

    pub fn build_strategy(&self, cfg: &Config) -> Result<Box<dyn GainStrategy>> {
        let name = &cfg.design.strategy;
        let f = self.strategies.get(name).ok_or_else(|| CoreError::Unknown {
            what: "gain strategy",
            name: name.clone(),
        })?;
        f.build(cfg)
    }
}

/// Plant from explicit matrices; `H` defaults to zero.
fn generic_plant(orientation: Orientation, p: &PlantSpec, pde_inputs: usize, pde_outputs: usize) -> Result<FinitePlant> {
    let e = required_matrix(&p.e, "plant.E")?;
    let f = required_matrix(&p.f, "plant.F")?;
    let g = required_matrix(&p.g, "plant.G")?;
    let h = match matrix(&p.h, "plant.H")? {
        Some(h) => h,
        None => match orientation {
            Orientation::Actuator => DMatrix::zeros(g.nrows(), pde_outputs),
            Orientation::Sensor => DMatrix::zeros(pde_inputs, f.ncols()),
        },
    };
    let j = matrix(&p.j, "plant.J")?;
    if p.gbar.is_some() {
        return Err(CoreError::config("plant.Gbar", "only the builtin-wave kind takes Gbar"));
    }
    let plant = FinitePlant::new(orientation, e, f, g, h, j).map_err(|e| CoreError::config("plant", e.to_string()))?;
    plant
        .check_interface(pde_inputs, pde_outputs)
        .map_err(|e| CoreError::config("plant", e.to_string()))?;
    Ok(plant)
}

fn expect_orientation(cfg: &Config, want: Orientation, kind: &str) -> Result<()> {
    if cfg.orientation != want {
        return Err(CoreError::config(
            "orientation",
            format!("{kind} is a {} model", want.as_str()),
        ));
    }
    Ok(())
}

fn truncation(spec: &PdeSpec, path: &str, default: usize) -> Result<usize> {
    match spec.truncation {
        Some(0) => Err(CoreError::config(format!("{path}.truncation"), "must be positive")),
        Some(n) => Ok(n),
        None => Ok(default),
    }
}

fn plain(pde: Arc<dyn Realization>, plant: FinitePlant) -> Built {
    Built {
        pde,
        plant,
        appended_states: 0,
        wave_base: None,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeParam {
    eigenvalue: f64,
    input: Vec<f64>,
    output: Vec<f64>,
}

/// Finite list of modes, `params.modes = [{eigenvalue, input, output}]`.
struct ModalFactory;

impl RealizationFactory for ModalFactory {
    fn kind(&self) -> &str {
        "modal"
    }

    fn build(&self, _: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        let modes: Vec<ModeParam> =
            param(spec, "modes", path)?.ok_or_else(|| CoreError::config(format!("{path}.params.modes"), "missing"))?;
        if modes.is_empty() {
            return Err(CoreError::config(format!("{path}.params.modes"), "empty"));
        }
        let (m, q) = (modes[0].input.len(), modes[0].output.len());
        for (i, md) in modes.iter().enumerate() {
            if md.input.len() != m || md.output.len() != q {
                return Err(CoreError::config(
                    format!("{path}.params.modes[{i}]"),
                    format!("expected {m} input and {q} output coefficients"),
                ));
            }
        }
        let n = truncation(spec, path, modes.len())?;
        if n > modes.len() {
            return Err(CoreError::config(
                format!("{path}.truncation"),
                format!("{n} exceeds the {} listed modes", modes.len()),
            ));
        }
        let source = ModeSource::Finite(
            modes
                .into_iter()
                .map(|md| Mode {
                    eigenvalue: md.eigenvalue,
                    input: md.input,
                    output: md.output,
                })
                .collect(),
        );
        let pde = ModalRealization::new("modal", source, n, None)?;
        let plant = generic_plant(cfg.orientation, &cfg.plant, m, q)?;
        Ok(plain(Arc::new(pde), plant))
    }
}

/// Explicit truncation, `params = {A, B, C, grid?}`.
struct StateSpaceFactory;

impl RealizationFactory for StateSpaceFactory {
    fn kind(&self) -> &str {
        "grid"
    }

    fn build(&self, _: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        let get = |name: &str| -> Result<DMatrix<f64>> {
            let rows: Option<Vec<Vec<f64>>> = param(spec, name, path)?;
            required_matrix(&rows, &format!("{path}.params.{name}"))
        };
        let (a, b, c) = (get("A")?, get("B")?, get("C")?);
        let mut pde = StateSpaceRealization::new(spec.kind.clone(), Operator::Dense(a), b, c)
            .map_err(|e| CoreError::config(format!("{path}.params"), e.to_string()))?;
        if let Some(grid) = param::<Vec<f64>>(spec, "grid", path)? {
            pde = pde.with_grid(grid);
        }
        let plant = generic_plant(cfg.orientation, &cfg.plant, pde.inputs(), pde.outputs())?;
        Ok(plain(Arc::new(pde), plant))
    }
}

/// Neumann heat equation with the integrator mode moved into the plant.
struct DiffusionFactory;

pub const DEFAULT_MODES: usize = 200;
pub const DEFAULT_GRID_POINTS: usize = 128;

impl RealizationFactory for DiffusionFactory {
    fn kind(&self) -> &str {
        "builtin-diffusion"
    }

    fn build(&self, _: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        expect_orientation(cfg, Orientation::Actuator, self.kind())?;
        let base = if cfg.plant.is_empty() {
            None
        } else {
            Some(generic_plant(Orientation::Actuator, &cfg.plant, 1, 1)?)
        };
        let (pde, plant) = neumann_diffusion(truncation(spec, path, DEFAULT_MODES)?, base)?;
        Ok(Built {
            pde: Arc::new(pde),
            plant,
            appended_states: 1,
            wave_base: None,
        })
    }
}

/// Heat equation with transfer `1/cosh √s`.
struct DirichletFactory;

impl RealizationFactory for DirichletFactory {
    fn kind(&self) -> &str {
        "builtin-dirichlet-diffusion"
    }

    fn build(&self, _: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        expect_orientation(cfg, Orientation::Actuator, self.kind())?;
        let pde = dirichlet_diffusion(truncation(spec, path, DEFAULT_MODES)?)?;
        let plant = if cfg.plant.is_empty() {
            default_oscillator_plant()
        } else {
            generic_plant(Orientation::Actuator, &cfg.plant, 1, 1)?
        };
        Ok(plain(Arc::new(pde), plant))
    }
}

/// Boundary-damped wave equation sensed through the oscillator plant.
struct WaveFactory;

impl RealizationFactory for WaveFactory {
    fn kind(&self) -> &str {
        "builtin-wave"
    }

    fn build(&self, _: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        expect_orientation(cfg, Orientation::Sensor, self.kind())?;
        let p = &cfg.plant;
        if p.g.is_some() || p.h.is_some() || p.j.is_some() {
            return Err(CoreError::config(
                "plant",
                "builtin-wave derives G and H from E, F and Gbar; J is not supported",
            ));
        }
        let mut base = WaveBasePlant::default();
        if let Some(e) = matrix(&p.e, "plant.E")? {
            base.e = e;
        }
        if let Some(f) = matrix(&p.f, "plant.F")? {
            base.f = f;
        }
        if let Some(g) = matrix(&p.gbar, "plant.Gbar")? {
            base.gbar = g;
        }
        let (grid, plant) = wave_sensor(truncation(spec, path, DEFAULT_GRID_POINTS)?, Some(base.clone()))?;
        Ok(Built {
            pde: grid,
            plant,
            appended_states: 0,
            wave_base: Some(base),
        })
    }
}

/// First-order input filter around an inner actuator realization.
struct FilterFactory;

impl RealizationFactory for FilterFactory {
    fn kind(&self) -> &str {
        "filter-augmented"
    }

    fn build(&self, registry: &Registry, cfg: &Config, spec: &PdeSpec, path: &str) -> Result<Built> {
        let inner_spec = spec
            .inner
            .as_deref()
            .ok_or_else(|| CoreError::config(format!("{path}.inner"), "missing"))?;
        let inner = registry.build_realization(cfg, inner_spec, &format!("{path}.inner"))?;
        let (plant, pde) = augment_input_filter(&inner.plant, inner.pde)?;
        Ok(Built {
            pde: Arc::new(pde),
            plant,
            appended_states: inner.appended_states,
            wave_base: None,
        })
    }
}

struct LqrFactory;

impl StrategyFactory for LqrFactory {
    fn name(&self) -> &str {
        "lqr"
    }

    fn build(&self, _: &Config) -> Result<Box<dyn GainStrategy>> {
        Ok(Box::new(LqrGains))
    }
}

struct FixedFactory;

impl StrategyFactory for FixedFactory {
    fn name(&self) -> &str {
        "fixed"
    }

    fn build(&self, cfg: &Config) -> Result<Box<dyn GainStrategy>> {
        let f = &cfg.design.fixed;
        Ok(Box::new(FixedGains {
            k: matrix(&f.k, "design.fixed.K")?,
            l: matrix(&f.l, "design.fixed.L")?,
        }))
    }
}

/// Result of [`Problem::synthesize`].
#[derive(Debug, Clone)]
pub enum Synthesis {
    StateFeedback(StateFeedbackLaw),
    OutputFeedback(ControllerRealization),
    Observer(ObserverRealization),
}

impl Synthesis {
    pub fn design(&self) -> Design {
        match self {
            Synthesis::StateFeedback(l) => l.design(),
            Synthesis::OutputFeedback(c) => c.design(),
            Synthesis::Observer(o) => o.design(),
        }
    }

    pub fn report(&self) -> &SolvabilityReport {
        match self {
            Synthesis::StateFeedback(l) => &l.report,
            Synthesis::OutputFeedback(c) => &c.law.report,
            Synthesis::Observer(o) => &o.report,
        }
    }

    pub fn identity_defect(&self) -> f64 {
        match self {
            Synthesis::StateFeedback(l) => l.identity_defect(),
            Synthesis::OutputFeedback(c) => c.law.identity_defect(),
            Synthesis::Observer(o) => o.identity_defect(),
        }
    }

    pub fn solution(&self) -> &SylvesterSolution {
        match self {
            Synthesis::StateFeedback(l) => &l.solution,
            Synthesis::OutputFeedback(c) => &c.law.solution,
            Synthesis::Observer(o) => &o.solution,
        }
    }
}

/// Everything a command needs: plant, realization and gain strategy.
#[derive(Debug)]
pub struct Problem {
    pub config: Config,
    pub plant: FinitePlant,
    pub pde: Arc<dyn Realization>,
    pub strategy: Box<dyn GainStrategy>,
    pub appended_states: usize,
    pub wave_base: Option<WaveBasePlant>,
}

impl Problem {
    pub fn new(config: Config, registry: &Registry) -> Result<Self> {
        config.validate()?;
        let built = registry.build_realization(&config, &config.pde, "pde")?;
        let strategy = registry.build_strategy(&config)?;
        Ok(Problem {
            plant: built.plant,
            pde: built.pde,
            appended_states: built.appended_states,
            wave_base: built.wave_base,
            strategy,
            config,
        })
    }

    pub fn mode(&self) -> DesignMode {
        self.config.mode()
    }

    /// Solvability only.
    pub fn check(&self) -> Result<SolvabilityReport> {
        let opts = self.config.design.options();
        let np = self.plant.normalize(opts.split_tolerance)?;
        match self.plant.orientation {
            Orientation::Actuator => check_actuator_solvability(&np, self.pde.transfer(), opts.solvability_tolerance),
            Orientation::Sensor => check_sensor_solvability(&np, self.pde.transfer(), opts.solvability_tolerance),
        }
    }

    pub fn synthesize(&self) -> Result<Synthesis> {
        let opts = self.config.design.options();
        let (plant, pde, strategy) = (&self.plant, self.pde.as_ref(), self.strategy.as_ref());
        Ok(match self.mode() {
            DesignMode::StateFeedback => Synthesis::StateFeedback(synth_state_feedback(plant, pde, strategy, &opts)?),
            DesignMode::OutputFeedback => {
                Synthesis::OutputFeedback(synth_output_feedback(plant, pde, strategy, &opts)?)
            }
            DesignMode::Observer => Synthesis::Observer(synth_observer(plant, pde, strategy, &opts)?),
        })
    }

    /// Plant initial state, padded for coordinates a builtin appended.
    fn initial_w(&self) -> Result<Vec<f64>> {
        let n = self.plant.dim();
        let w0 = &self.config.simulation.w0;
        if w0.is_empty() {
            return Ok(vec![0.0; n]);
        }
        if w0.len() == n {
            return Ok(w0.clone());
        }
        if self.appended_states > 0 && w0.len() + self.appended_states == n {
            let mut w = w0.clone();
            w.resize(n, 0.0);
            return Ok(w);
        }
        Err(CoreError::config(
            "simulation.w0",
            format!("expected {n} entries, got {}", w0.len()),
        ))
    }

    /// PDE initial state. For the wave builtin the default is the state
    /// whose untransformed profile `z̄ = z + x²Ḡw` vanishes.
    fn initial_z(&self, w0: &[f64]) -> Result<Vec<f64>> {
        let nz = self.pde.truncation().dim();
        if let Some(z0) = &self.config.simulation.z0 {
            if z0.len() != nz {
                return Err(CoreError::config(
                    "simulation.z0",
                    format!("expected {nz} entries, got {}", z0.len()),
                ));
            }
            return Ok(z0.clone());
        }
        let (Some(base), Some(grid)) = (&self.wave_base, self.pde.grid()) else {
            return Ok(vec![0.0; nz]);
        };
        let w = DMatrix::from_column_slice(w0.len(), 1, w0);
        let sim = &self.config.simulation;
        let inputs = base.f.ncols();
        let mut u0 = DMatrix::zeros(inputs, 1);
        if sim.forcing_channel < inputs {
            u0[(sim.forcing_channel, 0)] = sim.forcing.value(0.0);
        }
        let gw = (&base.gbar * &w)[(0, 0)];
        let gdw = (&base.gbar * (&base.e * &w + &base.f * u0))[(0, 0)];
        let m = grid.len();
        let mut z = vec![0.0; nz];
        for (i, x) in grid.iter().enumerate() {
            z[i] = -x * x * gw;
            z[m + i] = -x * x * gdw;
        }
        Ok(z)
    }

    /// The closed loop of a design at `δ = 0` with the configured initial
    /// state and forcing.
    pub fn scenario(&self, design: &Design) -> Result<ClosedLoopSystem> {
        let mut sys = assemble_closed_loop(&self.plant, self.pde.as_ref(), Some(design), 0.0)?;
        let w0 = self.initial_w()?;
        let z0 = self.initial_z(&w0)?;
        sys.set_initial("w", &w0)?;
        sys.set_initial("z", &z0)?;
        if self.wave_base.is_some() {
            // z̄(0) = z(0) since x² vanishes there
            let z = sys.block("z").expect("assembled").start;
            let mut row = DMatrix::zeros(1, sys.dim());
            row[(0, z)] = 1.0;
            sys.add_output("zbar_x0", row)?;
        }
        let sim = &self.config.simulation;
        sys.with_forcing(&sim.forcing, sim.forcing_channel)
    }

    /// Integrates the scenario and fits decay rates of the signals that
    /// should vanish.
    pub fn simulate(&self, design: &Design) -> Result<(Trajectory, Vec<DecayReport>)> {
        let sys = self.scenario(design)?;
        let sim = &self.config.simulation;
        let traj = integrate(&sys, sim.horizon, sim.step)?;
        if let Some(time) = traj.overflow {
            return Err(CoreError::Overflow { time });
        }
        let labels: &[&str] = match design {
            Design::Observer { .. } => &["error", "error_w"],
            _ => &["w", "z"],
        };
        let mut reports = Vec::new();
        for label in labels {
            match fit_decay_rate(&traj, label) {
                Ok(r) => reports.push(r),
                Err(CoreError::DegenerateTrajectory(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok((traj, reports))
    }

    pub fn sweep(&self, design: &Design) -> Result<SweepReport> {
        delta_sweep(&self.plant, self.pde.as_ref(), design, &self.config.sweep)
    }
}
