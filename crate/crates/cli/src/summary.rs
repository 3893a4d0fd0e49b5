//! The run summary written next to every command's outputs.

use cascade_core::linalg::{spectral_abscissa, to_rows, C64};
use cascade_core::pde::AnalyticityProbe;
use cascade_core::simulate::{DecayReport, StableInterval, SweepReport};
use cascade_core::synthesis::SolvabilityReport;
use cascade_core::{Config, Problem, Result, Synthesis};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the effective configuration.
    pub config_fingerprint: String,
    pub timestamp_unix: u64,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub problem: ProblemInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solvability: Option<SolvabilitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<Gains>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Certificates>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub analyticity: Vec<ProbeSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub decay: Vec<DecayReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Infeasible,
    Error,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Infeasible => 2,
            Outcome::Error => 1,
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct ProblemInfo {
    pub orientation: String,
    pub mode: String,
    pub pde_kind: String,
    pub truncation_dim: usize,
    pub growth_bound: f64,
    pub plant_dim: usize,
    pub unstable_dim: usize,
    pub strategy: String,
}

#[derive(Debug, Serialize)]
pub struct EigenSummary {
    /// `[re, im]`.
    pub eigenvalue: [f64; 2],
    pub margin: f64,
}

#[derive(Debug, Serialize)]
pub struct SolvabilitySummary {
    pub condition: &'static str,
    pub solvable: bool,
    pub threshold: f64,
    pub min_margin: f64,
    pub eigenvalues: Vec<EigenSummary>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

impl From<&SolvabilityReport> for SolvabilitySummary {
    fn from(r: &SolvabilityReport) -> Self {
        SolvabilitySummary {
            condition: r.condition.as_str(),
            solvable: r.solvable,
            threshold: r.threshold,
            min_margin: r.min_margin(),
            eigenvalues: r
                .records
                .iter()
                .map(|e| EigenSummary {
                    eigenvalue: pair(e.eigenvalue),
                    margin: e.margin,
                })
                .collect(),
        }
    }
}

/// Gains and finite products; absent entries do not apply to the mode.
#[derive(Debug, Default, Serialize)]
#[allow(non_snake_case)]
pub struct Gains {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub K: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub K1: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub K2: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub L: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub L1: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Ltilde: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Pi_B: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub C1_Pi: Option<Rows>,
}

#[derive(Debug, Default, Serialize)]
pub struct Certificates {
    /// Relative residual of the truncated Sylvester equation.
    pub sylvester_residual: f64,
    /// Eigenvector identity mismatch between `Π` products and `G(λ)`.
    pub identity_defect: f64,
    /// `−α` of the finite design matrix.
    pub gain_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injection_margin: Option<f64>,
    /// Spectral abscissa of the assembled closed loop or error dynamics.
    pub closed_loop_abscissa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangularity_defect: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ProbeSummary {
    pub point: [f64; 2],
    pub cauchy_riemann_residual: f64,
    pub conjugate_symmetry_defect: f64,
    pub passed: bool,
}

impl ProbeSummary {
    pub fn new(probe: &AnalyticityProbe, symmetry: f64) -> Self {
        ProbeSummary {
            point: pair(probe.point),
            cauchy_riemann_residual: probe.residual,
            conjugate_symmetry_defect: symmetry,
            passed: probe.passed(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    pub stable_points: usize,
    pub interval: Option<StableInterval>,
}

impl From<&SweepReport> for SweepSummary {
    fn from(r: &SweepReport) -> Self {
        SweepSummary {
            points: r.points.len(),
            stable_points: r.points.iter().filter(|p| p.stable).count(),
            interval: r.interval,
        }
    }
}

pub fn fingerprint(config: &Config) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(config.to_json().as_bytes());
    hex::encode(h.finalize())
}

impl RunSummary {
    pub fn new(command: &str, config: Option<&Config>) -> Self {
        RunSummary {
            tool: "cascade",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_fingerprint: config.map(fingerprint).unwrap_or_default(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            outcome: Outcome::Success,
            message: None,
            problem: ProblemInfo::default(),
            solvability: None,
            gains: None,
            certificates: None,
            analyticity: Vec::new(),
            decay: Vec::new(),
            sweep: None,
        }
    }

    pub fn describe(&mut self, p: &Problem) {
        let split = p
            .plant
            .normalize(p.config.design.split_tolerance)
            .map(|np| np.n1())
            .unwrap_or(0);
        self.problem = ProblemInfo {
            orientation: p.plant.orientation.as_str().into(),
            mode: p.mode().as_str().into(),
            pde_kind: p.pde.kind().into(),
            truncation_dim: p.pde.truncation().dim(),
            growth_bound: p.pde.growth_bound(),
            plant_dim: p.plant.dim(),
            unstable_dim: split,
            strategy: p.strategy.name().into(),
        };
    }

    /// Gains and certificates of a synthesis, with the closed loop
    /// assembled at `δ = 0`.
    pub fn record_synthesis(&mut self, p: &Problem, s: &Synthesis) -> Result<()> {
        let rows = |m: &DMatrix<f64>| Some(to_rows(m));
        self.solvability = Some(s.report().into());
        let (gains, mut cert) = match s {
            Synthesis::StateFeedback(law) => (
                Gains {
                    K: rows(&law.k),
                    K1: rows(&law.k1),
                    K2: rows(&law.k2),
                    Pi_B: rows(&law.pi_b),
                    ..Gains::default()
                },
                Certificates {
                    gain_margin: law.margin,
                    ..Certificates::default()
                },
            ),
            Synthesis::OutputFeedback(c) => (
                Gains {
                    K: rows(&c.law.k),
                    K1: rows(&c.law.k1),
                    K2: rows(&c.law.k2),
                    L: rows(&c.l),
                    L1: rows(&c.l1),
                    Pi_B: rows(&c.law.pi_b),
                    ..Gains::default()
                },
                Certificates {
                    gain_margin: c.law.margin,
                    injection_margin: Some(c.injection_margin),
                    ..Certificates::default()
                },
            ),
            Synthesis::Observer(o) => (
                Gains {
                    L: rows(&o.l),
                    Ltilde: rows(&o.ltilde),
                    C1_Pi: rows(&o.c1_pi),
                    ..Gains::default()
                },
                Certificates {
                    gain_margin: o.margin,
                    triangularity_defect: Some(o.triangularity_defect),
                    ..Certificates::default()
                },
            ),
        };
        cert.sylvester_residual = s.solution().residual;
        cert.identity_defect = s.identity_defect();
        cert.closed_loop_abscissa = match s {
            Synthesis::Observer(o) => spectral_abscissa(&o.a_o)?,
            _ => cascade_core::simulate::assemble_closed_loop(&p.plant, p.pde.as_ref(), Some(&s.design()), 0.0)?
                .spectral_abscissa()?,
        };
        self.gains = Some(gains);
        self.certificates = Some(cert);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
