use nalgebra::Complex;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("matrix `{name}` must be square, got {rows}x{cols}")]
    NonSquare {
        name: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigenvalue {eigenvalue} lies inside the split ambiguity band ({lower:e}, {upper:e}); choose the partition explicitly or adjust the split tolerance")]
    BoundaryEigenvalue {
        eigenvalue: Complex<f64>,
        lower: f64,
        upper: f64,
    },

    #[error("eigendecomposition failed: {0}")]
    EigDecompositionFailure(String),

    #[error("pair is not stabilizable: uncontrollable eigenvalue {eigenvalue}")]
    NotStabilizable { eigenvalue: Complex<f64> },

    #[error("pair is not detectable: unobservable eigenvalue {eigenvalue}")]
    NotDetectable { eigenvalue: Complex<f64> },

    #[error("requested stability margin {requested} not reached, achieved {achieved}")]
    MarginUnreachable { requested: f64, achieved: f64 },

    #[error("Riccati solver failed: {0}")]
    RiccatiFailure(String),

    #[error("evaluation point {0} coincides with an eigenvalue of the realization")]
    AtEigenvalue(Complex<f64>),

    #[error("modal series did not reach tolerance {tolerance:e} within {terms} terms (tail bound {tail:e})")]
    SlowConvergence {
        tolerance: f64,
        terms: usize,
        tail: f64,
    },

    #[error("resolvent is singular at s = {0}")]
    SingularResolvent(Complex<f64>),

    #[error("spectrum of E1 overlaps the spectrum of the stable block near {0}")]
    SpectraOverlap(Complex<f64>),

    #[error("Sylvester residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("derivative of order {order} unavailable at s = {point}: {reason}")]
    DerivativeUnavailable {
        order: usize,
        point: Complex<f64>,
        reason: String,
    },

    #[error("imaginary part {imag:e} of `{what}` did not cancel")]
    NotReal { what: &'static str, imag: f64 },

    #[error("vectorized Sylvester system is singular")]
    SingularSystem,

    #[error("transfer function undefined at eigenvalue {eigenvalue} (domain abscissa {abscissa})")]
    TransferUndefinedAtEigenvalue {
        eigenvalue: Complex<f64>,
        abscissa: f64,
    },

    #[error("cascade is not solvable: condition fails at eigenvalue {eigenvalue} (margin {margin:e}, threshold {threshold:e})")]
    NotSolvable {
        eigenvalue: Complex<f64>,
        margin: f64,
        threshold: f64,
    },

    #[error("state overflow at t = {time}")]
    Overflow { time: f64 },

    #[error("signal `{0}` is identically zero")]
    DegenerateTrajectory(String),

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("closed loop is unstable (spectral abscissa {abscissa})")]
    Unstable { abscissa: f64 },

    #[error("PDE block is not exponentially stable (growth bound {growth_bound}); split its unstable modes into the plant first")]
    NotExponentiallyStable { growth_bound: f64 },
}

impl CoreError {
    /// Mathematically infeasible outcomes, as opposed to operational failures.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            CoreError::NotStabilizable { .. }
                | CoreError::NotDetectable { .. }
                | CoreError::MarginUnreachable { .. }
                | CoreError::NotSolvable { .. }
                | CoreError::Unstable { .. }
                | CoreError::NotExponentiallyStable { .. }
        )
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
