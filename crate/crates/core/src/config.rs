//! Problem description read from JSON. Matrices are row-major nested
//! arrays; every field is validated before any numerics run.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CoreError, Result};
use crate::lti::{Orientation, DEFAULT_SPLIT_TOLERANCE};
use crate::serde_rows::try_from_rows;
use crate::simulate::{Forcing, SweepGrid};
use crate::synthesis::{DesignOptions, DEFAULT_SOLVABILITY_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub orientation: Orientation,
    #[serde(default)]
    pub plant: PlantSpec,
    pub pde: PdeSpec,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub sweep: SweepGrid,
}

/// Nested rows; `None` when the field is absent.
pub type Rows = Option<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Rows,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Rows,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Rows,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Rows,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Rows,
    /// Boundary output row of the wave builtin.
    #[serde(rename = "Gbar", default, skip_serializing_if = "Option::is_none")]
    pub gbar: Rows,
}

impl PlantSpec {
    pub fn is_empty(&self) -> bool {
        *self == PlantSpec::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    pub kind: String,
    /// Number of modes or grid points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    /// Wrapped realization of `filter-augmented`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<PdeSpec>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    StateFeedback,
    OutputFeedback,
    Observer,
}

impl DesignMode {
    pub fn orientation(self) -> Orientation {
        match self {
            DesignMode::Observer => Orientation::Sensor,
            _ => Orientation::Actuator,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DesignMode::StateFeedback => "state-feedback",
            DesignMode::OutputFeedback => "output-feedback",
            DesignMode::Observer => "observer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedSpec {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Rows,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSpec {
    /// Defaults to output feedback (actuator) or the observer (sensor).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<DesignMode>,
    pub strategy: String,
    pub margin: f64,
    pub injection_margin: f64,
    pub split_tolerance: f64,
    pub solvability_tolerance: f64,
    pub fixed: FixedSpec,
}

impl Default for DesignSpec {
    fn default() -> Self {
        let d = DesignOptions::default();
        DesignSpec {
            mode: None,
            strategy: "lqr".into(),
            margin: d.margin,
            injection_margin: d.injection_margin,
            split_tolerance: DEFAULT_SPLIT_TOLERANCE,
            solvability_tolerance: DEFAULT_SOLVABILITY_TOLERANCE,
            fixed: FixedSpec::default(),
        }
    }
}

impl DesignSpec {
    pub fn options(&self) -> DesignOptions {
        DesignOptions {
            split_tolerance: self.split_tolerance,
            solvability_tolerance: self.solvability_tolerance,
            margin: self.margin,
            injection_margin: self.injection_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub horizon: f64,
    pub step: f64,
    /// Plant initial state. Empty means zero.
    pub w0: Vec<f64>,
    /// PDE initial state on the truncation. Absent means the builtin's
    /// default (zero, or the consistent transform for the wave builtin).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
    pub forcing: Forcing,
    pub forcing_channel: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            horizon: 20.0,
            step: 0.01,
            w0: Vec::new(),
            z0: None,
            forcing: Forcing::None,
            forcing_channel: 0,
        }
    }
}

impl Config {
    /// Parses and validates; errors carry a field path or a line number.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| CoreError::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mode(&self) -> DesignMode {
        self.design.mode.unwrap_or(match self.orientation {
            Orientation::Actuator => DesignMode::OutputFeedback,
            Orientation::Sensor => DesignMode::Observer,
        })
    }

    /// Checks that do not need the realization.
    pub fn validate(&self) -> Result<()> {
        if self.mode().orientation() != self.orientation {
            return Err(CoreError::config(
                "design.mode",
                format!(
                    "{} does not apply to a {} cascade",
                    self.mode().as_str(),
                    self.orientation.as_str()
                ),
            ));
        }
        let d = &self.design;
        for (path, v) in [
            ("design.margin", d.margin),
            ("design.injection_margin", d.injection_margin),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CoreError::config(path, format!("must be a finite nonnegative number, got {v}")));
            }
        }
        for (path, v) in [
            ("design.split_tolerance", d.split_tolerance),
            ("design.solvability_tolerance", d.solvability_tolerance),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CoreError::config(path, format!("must lie in (0, 1), got {v}")));
            }
        }
        let s = &self.simulation;
        if !(s.step > 0.0) || !(s.horizon >= s.step) || !s.horizon.is_finite() {
            return Err(CoreError::config(
                "simulation",
                format!("need step > 0 and horizon >= step, got step {}, horizon {}", s.step, s.horizon),
            ));
        }
        if let Some(x) = s.w0.iter().chain(s.z0.iter().flatten()).find(|x| !x.is_finite()) {
            return Err(CoreError::config("simulation", format!("non-finite initial value {x}")));
        }
        self.sweep.points()?;
        let p = &self.plant;
        for (name, rows) in [("E", &p.e), ("F", &p.f), ("G", &p.g), ("H", &p.h), ("J", &p.j), ("Gbar", &p.gbar)] {
            if let Some(r) = rows {
                try_from_rows(r).map_err(|msg| CoreError::config(format!("plant.{name}"), msg))?;
            }
        }
        for (name, rows) in [("K", &d.fixed.k), ("L", &d.fixed.l)] {
            if let Some(r) = rows {
                try_from_rows(r).map_err(|msg| CoreError::config(format!("design.fixed.{name}"), msg))?;
            }
        }
        Ok(())
    }
}

/// Matrix at `path`, or a config error.
pub fn matrix(rows: &Rows, path: &str) -> Result<Option<DMatrix<f64>>> {
    rows.as_ref()
        .map(|r| try_from_rows(r).map_err(|msg| CoreError::config(path, msg)))
        .transpose()
}

/// Required matrix at `path`.
pub fn required_matrix(rows: &Rows, path: &str) -> Result<DMatrix<f64>> {
    matrix(rows, path)?.ok_or_else(|| CoreError::config(path, "missing"))
}

/// Parameter `name` of a PDE spec deserialized as `T`.
pub fn param<T: serde::de::DeserializeOwned>(spec: &PdeSpec, name: &str, path: &str) -> Result<Option<T>> {
    match spec.params.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| CoreError::config(format!("{path}.params.{name}"), e.to_string())),
    }
}
