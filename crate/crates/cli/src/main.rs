//! `cascade`: solvability checks, synthesis, simulation and δ-sweeps for
//! PDE-ODE cascades described by a JSON config.

mod summary;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cascade_core::linalg::c64;
use cascade_core::pde::{cauchy_riemann_probe, conjugate_symmetry_defect};
use cascade_core::simulate::SweepReport;
use cascade_core::synthesis::Design;
use cascade_core::{Config, CoreError, Problem, Registry};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use summary::{Outcome, ProbeSummary, RunSummary, SweepSummary};

/// Points at which the transfer function is probed for analyticity.
const PROBES: usize = 4;

#[derive(Parser, Debug)]
#[command(name = "cascade", version, about = "Compensate PDE actuator and sensor dynamics of unstable ODE plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Problem description (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Number of modes or grid points, overriding the config.
    #[arg(long, global = true)]
    truncation: Option<usize>,

    /// Sweep grid `min:max:steps`, overriding the config.
    #[arg(long, global = true, value_parser = parse_range)]
    delta_range: Option<(f64, f64, usize)>,

    /// Seed of the analyticity probe points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Gains file from `synthesize`; skips synthesis in `simulate` and `sweep`.
    #[arg(long, global = true)]
    gains: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solvability report only.
    Check,
    /// Synthesize the design and write `gains.json`.
    Synthesize,
    /// Simulate the closed loop or observer and write `trajectory.csv`.
    Simulate,
    /// Certify stability under `A → (1+δ)A` and write `sweep.csv`.
    Sweep,
    /// Run a builtin example end to end.
    Example { name: ExampleName },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExampleName {
    Diffusion,
    Wave,
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err("expected min:max:steps".into());
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    let steps = n.trim().parse::<usize>().map_err(|e| format!("`{n}`: {e}"))?;
    Ok((num(a)?, num(b)?, steps))
}

const DIFFUSION_EXAMPLE: &str = r#"{
  "orientation": "actuator",
  "pde": { "kind": "builtin-diffusion", "truncation": 200 },
  "design": {
    "mode": "output-feedback",
    "strategy": "fixed",
    "fixed": { "K": [[2.522, -1.361, -3.273]], "L": [[-3.0], [-1.75], [-0.75]] }
  },
  "simulation": { "horizon": 20.0, "step": 0.01, "w0": [1.0, 1.0] }
}
"#;

const WAVE_EXAMPLE: &str = r#"{
  "orientation": "sensor",
  "pde": { "kind": "builtin-wave", "truncation": 128 },
  "design": {
    "mode": "observer",
    "strategy": "fixed",
    "fixed": { "L": [[-2.462], [1.984]] }
  },
  "simulation": {
    "horizon": 20.0,
    "step": 0.01,
    "w0": [-1.0, 2.0],
    "forcing": { "kind": "sine", "amplitude": 1.0, "frequency": 5.0 }
  }
}
"#;

fn load_config(cli: &Cli, text: Option<&str>) -> Result<Config, CoreError> {
    let owned;
    let text = match (text, &cli.config) {
        (Some(t), _) => t,
        (None, Some(path)) => {
            owned = fs::read_to_string(path)
                .map_err(|e| CoreError::config(path.display().to_string(), e.to_string()))?;
            &owned
        }
        (None, None) => return Err(CoreError::config("--config", "required for this command")),
    };
    let mut cfg: Config = Config::from_json(text)?;
    if let Some(n) = cli.truncation {
        let mut spec = &mut cfg.pde;
        while let Some(inner) = spec.inner.as_deref_mut() {
            spec = inner;
        }
        spec.truncation = Some(n);
    }
    if let Some((min, max, steps)) = cli.delta_range {
        cfg.sweep.min = min;
        cfg.sweep.max = max;
        cfg.sweep.steps = steps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_error(path: &Path, e: std::io::Error) -> CoreError {
    CoreError::config(path.display().to_string(), e.to_string())
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), CoreError> {
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| io_error(&path, e))
}

fn load_gains(path: &Path) -> Result<Design, CoreError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CoreError::config(
            format!("{} line {} column {}", path.display(), e.line(), e.column()),
            e.to_string(),
        )
    })
}

fn probe_transfer(problem: &Problem, seed: u64) -> Result<Vec<ProbeSummary>, CoreError> {
    let oracle = problem.pde.transfer();
    let abscissa = oracle.domain_abscissa();
    let lo = if abscissa.is_finite() { abscissa + 0.5 } else { -5.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PROBES)
        .map(|_| {
            let s = c64(rng.random_range(lo..lo.max(0.0) + 5.0), rng.random_range(-5.0..5.0));
            Ok(ProbeSummary::new(
                &cauchy_riemann_probe(oracle, s)?,
                conjugate_symmetry_defect(oracle, s)?,
            ))
        })
        .collect()
}

fn write_sweep_csv(out: &Path, report: &SweepReport) -> Result<(), CoreError> {
    let mut csv = String::from("delta,abscissa,stable,refined\n");
    for p in &report.points {
        csv.push_str(&format!("{},{:e},{},{}\n", p.delta, p.abscissa, p.stable, p.refined));
    }
    write(out, "sweep.csv", &csv)
}

/// Runs one command, filling `summary` as it goes.
fn run(cli: &Cli, command: &Command, summary: &mut RunSummary, text: Option<&str>) -> Result<Outcome, CoreError> {
    let cfg = load_config(cli, text)?;
    summary.config_fingerprint = summary::fingerprint(&cfg);
    let problem = Problem::new(cfg, &Registry::default())?;
    summary.describe(&problem);
    fs::create_dir_all(&cli.out).map_err(|e| io_error(&cli.out, e))?;

    let check = |summary: &mut RunSummary| -> Result<bool, CoreError> {
        let report = problem.check()?;
        summary.solvability = Some((&report).into());
        summary.analyticity = probe_transfer(&problem, cli.seed)?;
        Ok(report.solvable)
    };
    let design = |summary: &mut RunSummary| -> Result<Design, CoreError> {
        if let Some(path) = &cli.gains {
            return load_gains(path);
        }
        let s = problem.synthesize()?;
        summary.record_synthesis(&problem, &s)?;
        let design = s.design();
        write(&cli.out, "gains.json", &serde_json::to_string_pretty(&design).expect("gains serialize"))?;
        Ok(design)
    };
    let simulate = |summary: &mut RunSummary, design: &Design| -> Result<(), CoreError> {
        let (traj, decay) = problem.simulate(design)?;
        let path = cli.out.join("trajectory.csv");
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        traj.write_csv(BufWriter::new(file)).map_err(|e| io_error(&path, e))?;
        summary.decay = decay;
        Ok(())
    };
    let sweep = |summary: &mut RunSummary, design: &Design| -> Result<bool, CoreError> {
        let report = problem.sweep(design)?;
        write_sweep_csv(&cli.out, &report)?;
        summary.sweep = Some(SweepSummary::from(&report));
        Ok(report.interval.is_some())
    };

    match command {
        Command::Check => {
            if !check(summary)? {
                return Ok(Outcome::Infeasible);
            }
        }
        Command::Synthesize => {
            design(summary)?;
        }
        Command::Simulate => {
            let d = design(summary)?;
            simulate(summary, &d)?;
        }
        Command::Sweep => {
            let d = design(summary)?;
            if !sweep(summary, &d)? {
                return Ok(Outcome::Infeasible);
            }
        }
        Command::Example { name } => {
            write(&cli.out, "config.json", &problem.config.to_json())?;
            summary.analyticity = probe_transfer(&problem, cli.seed)?;
            let d = design(summary)?;
            simulate(summary, &d)?;
            if matches!(name, ExampleName::Diffusion) && !sweep(summary, &d)? {
                return Ok(Outcome::Infeasible);
            }
        }
    }
    Ok(Outcome::Success)
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Check => "check".into(),
        Command::Synthesize => "synthesize".into(),
        Command::Simulate => "simulate".into(),
        Command::Sweep => "sweep".into(),
        Command::Example { name } => format!("example {}", format!("{name:?}").to_lowercase()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.command {
        Command::Example { name: ExampleName::Diffusion } => Some(DIFFUSION_EXAMPLE),
        Command::Example { name: ExampleName::Wave } => Some(WAVE_EXAMPLE),
        _ => None,
    };
    let mut summary = RunSummary::new(&command_name(&cli.command), None);
    let outcome = match run(&cli, &cli.command, &mut summary, text) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            summary.message = Some(e.to_string());
            if e.is_infeasible() || matches!(e, CoreError::Overflow { .. }) {
                Outcome::Infeasible
            } else {
                Outcome::Error
            }
        }
    };
    summary.outcome = outcome;
    let json = summary.to_json();
    println!("{json}");
    if cli.out.is_dir() {
        if let Err(e) = fs::write(cli.out.join("summary.json"), &json) {
            eprintln!("error: cannot write summary: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(outcome.exit_code() as u8)
}
