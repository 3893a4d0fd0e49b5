//! Solvability checks and the three designs: state feedback, observer-based
//! output feedback and the cascade observer.

pub mod design;
pub mod solvability;
pub mod strategy;

pub use design::{
    synth_observer, synth_output_feedback, synth_state_feedback, triangularity_defect, ControllerRealization, Design,
    ObserverRealization, StateFeedbackLaw,
};
pub use solvability::{
    check_actuator_solvability, check_sensor_solvability, Condition, EigenRecord, SolvabilityReport,
    DEFAULT_SOLVABILITY_TOLERANCE,
};
pub use strategy::{FixedGains, GainStrategy, LqrGains};

use crate::lti::DEFAULT_SPLIT_TOLERANCE;

/// Tolerances and margins shared by the synthesis routines.
#[derive(Debug, Clone, Copy)]
pub struct DesignOptions {
    pub split_tolerance: f64,
    pub solvability_tolerance: f64,
    /// Decay margin requested for `E₁ + B̂K`.
    pub margin: f64,
    /// Decay margin requested for the injection gain.
    pub injection_margin: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            split_tolerance: DEFAULT_SPLIT_TOLERANCE,
            solvability_tolerance: DEFAULT_SOLVABILITY_TOLERANCE,
            margin: 1.0,
            injection_margin: 1.0,
        }
    }
}
