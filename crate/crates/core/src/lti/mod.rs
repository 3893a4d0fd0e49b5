//! Finite-dimensional substrate: spectral split, exponential coefficients,
//! Hautus tests and gain synthesis.

pub mod expcoef;
pub mod gain;
pub mod hautus;
pub mod plant;
pub mod schur;

pub use expcoef::{exp_coefficients, ExpCoefficients};
pub use gain::{care, place_injection_gain, place_stabilizing_gain, verify_hurwitz};
pub use hautus::{hautus_detectable, hautus_stabilizable, HautusVerdict, HautusWitness};
pub use plant::{FinitePlant, NormalizedPlant, Orientation};
pub use schur::{ordered_schur, split_stable_unstable, OrderedSchur, SpectralSplit, DEFAULT_SPLIT_TOLERANCE};
