use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::linalg::C64;
use crate::pde::{Operator, Realization, TransferOracle, Truncation};

/// One eigenmode: `λ_n`, input coefficients `b_n` (length m) and output
/// coefficients `c_n` (length q).
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: f64,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

pub type ModeFn = Arc<dyn Fn(usize) -> Mode + Send + Sync>;

/// Either an explicit finite list of modes or a generator for an infinite
/// family, cut off at `n_max` for series evaluation.
#[derive(Clone)]
pub enum ModeSource {
    Finite(Vec<Mode>),
    Generator { modes: ModeFn, n_max: usize },
}

impl fmt::Debug for ModeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSource::Finite(m) => write!(f, "Finite({} modes)", m.len()),
            ModeSource::Generator { n_max, .. } => write!(f, "Generator(n_max = {n_max})"),
        }
    }
}

impl ModeSource {
    fn len(&self) -> usize {
        match self {
            ModeSource::Finite(m) => m.len(),
            ModeSource::Generator { n_max, .. } => *n_max,
        }
    }

    fn get(&self, n: usize) -> Mode {
        match self {
            ModeSource::Finite(m) => m[n].clone(),
            ModeSource::Generator { modes, .. } => modes(n),
        }
    }

    fn is_finite(&self) -> bool {
        matches!(self, ModeSource::Finite(_))
    }
}

/// Diagonal (Riesz-basis) realization with real eigenvalues.
#[derive(Clone)]
pub struct ModalRealization {
    kind: String,
    source: ModeSource,
    inputs: usize,
    outputs: usize,
    truncation: Truncation,
    growth_bound: f64,
    closed_form: Option<Arc<dyn TransferOracle>>,
    series: SeriesTransfer,
}

impl fmt::Debug for ModalRealization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModalRealization")
            .field("kind", &self.kind)
            .field("source", &self.source)
            .field("truncation", &self.truncation.dim())
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-10;

impl ModalRealization {
    /// Builds the realization with the first `n_trunc` modes as truncation.
    pub fn new(
        kind: impl Into<String>,
        source: ModeSource,
        n_trunc: usize,
        closed_form: Option<Arc<dyn TransferOracle>>,
    ) -> Result<Self> {
        let available = source.len();
        if available == 0 {
            return Err(CoreError::DimensionMismatch("modal realization needs at least one mode".into()));
        }
        let n = n_trunc.min(available);
        if n == 0 {
            return Err(CoreError::DimensionMismatch("truncation order must be positive".into()));
        }
        let first = source.get(0);
        let (inputs, outputs) = (first.input.len(), first.output.len());
        let mut lam = DVector::zeros(n);
        let mut b = DMatrix::zeros(n, inputs);
        let mut c = DMatrix::zeros(outputs, n);
        for i in 0..n {
            let mode = source.get(i);
            if mode.input.len() != inputs || mode.output.len() != outputs {
                return Err(CoreError::DimensionMismatch(format!(
                    "mode {i} has {} input and {} output coefficients, expected {inputs} and {outputs}",
                    mode.input.len(),
                    mode.output.len()
                )));
            }
            if !mode.eigenvalue.is_finite() {
                return Err(CoreError::DimensionMismatch(format!("mode {i} has a non-finite eigenvalue")));
            }
            lam[i] = mode.eigenvalue;
            for (j, &v) in mode.input.iter().enumerate() {
                b[(i, j)] = v;
            }
            for (j, &v) in mode.output.iter().enumerate() {
                c[(j, i)] = v;
            }
        }
        let growth_bound = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let truncation = Truncation::new(Operator::Diagonal(lam), b, c)?;
        let series = SeriesTransfer {
            source: source.clone(),
            inputs,
            outputs,
            abscissa: growth_bound,
            tolerance: DEFAULT_SERIES_TOLERANCE,
        };
        Ok(ModalRealization {
            kind: kind.into(),
            source,
            inputs,
            outputs,
            truncation,
            growth_bound,
            closed_form,
            series,
        })
    }

    pub fn closed_form(&self) -> Option<&dyn TransferOracle> {
        self.closed_form.as_deref()
    }

    /// Series evaluation `Σ c_n b_n / (s − λ_n)` up to tail bound `series_tol`.
    pub fn series_eval(&self, s: C64, series_tol: f64) -> Result<DMatrix<C64>> {
        series_sum(&self.source, self.inputs, self.outputs, s, series_tol)
    }

    /// Preferred transfer value: the closed form if present, else the series.
    pub fn transfer_eval(&self, s: C64, series_tol: f64) -> Result<DMatrix<C64>> {
        for i in 0..self.truncation.dim() {
            let lam = match &self.truncation.a {
                Operator::Diagonal(d) => d[i],
                _ => unreachable!("modal truncations are diagonal"),
            };
            if (s - lam).norm() <= 1e-14 * lam.abs().max(1.0) {
                return Err(CoreError::AtEigenvalue(s));
            }
        }
        match &self.closed_form {
            Some(cf) => cf.eval(s),
            None => self.series_eval(s, series_tol),
        }
    }

    pub fn mode(&self, n: usize) -> Mode {
        self.source.get(n)
    }
}

fn term(mode: &Mode, s: C64, inputs: usize, outputs: usize) -> Result<DMatrix<C64>> {
    let gap = s - mode.eigenvalue;
    if gap.norm() <= 1e-14 * mode.eigenvalue.abs().max(1.0) {
        return Err(CoreError::AtEigenvalue(s));
    }
    let inv = gap.inv();
    Ok(DMatrix::from_fn(outputs, inputs, |i, j| inv * (mode.output[i] * mode.input[j])))
}

fn alternates(prev: &Mode, next: &Mode) -> bool {
    prev.output.iter().zip(&next.output).all(|(a, b)| a * b >= 0.0)
        && prev.input.iter().zip(&next.input).all(|(a, b)| a * b <= 0.0)
        || prev.output.iter().zip(&next.output).all(|(a, b)| a * b <= 0.0)
            && prev.input.iter().zip(&next.input).all(|(a, b)| a * b >= 0.0)
}

/// Sums the modal series. For sign-alternating coefficients the tail bound is
/// the first omitted term; otherwise a `1/n²`-decay estimate `n·|term_n|`.
fn series_sum(source: &ModeSource, inputs: usize, outputs: usize, s: C64, tol: f64) -> Result<DMatrix<C64>> {
    let total = source.len();
    let mut acc = DMatrix::<C64>::zeros(outputs, inputs);
    let mut prev = source.get(0);
    acc += term(&prev, s, inputs, outputs)?;
    let mut tail = f64::INFINITY;
    for n in 1..total {
        let mode = source.get(n);
        let t = term(&mode, s, inputs, outputs)?;
        let size = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
        acc += t;
        if !source.is_finite() {
            let next_size = if n + 1 < total {
                let next = source.get(n + 1);
                term(&next, s, inputs, outputs)?.iter().map(|z| z.norm()).fold(0.0, f64::max)
            } else {
                size
            };
            tail = if alternates(&prev, &mode) { next_size } else { size * n as f64 };
            if tail < tol {
                return Ok(acc);
            }
        }
        prev = mode;
    }
    if source.is_finite() {
        return Ok(acc);
    }
    Err(CoreError::SlowConvergence {
        tolerance: tol,
        terms: total,
        tail,
    })
}

#[derive(Clone)]
struct SeriesTransfer {
    source: ModeSource,
    inputs: usize,
    outputs: usize,
    abscissa: f64,
    tolerance: f64,
}

impl TransferOracle for SeriesTransfer {
    fn inputs(&self) -> usize {
        self.inputs
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn domain_abscissa(&self) -> f64 {
        self.abscissa
    }

    fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        series_sum(&self.source, self.inputs, self.outputs, s, self.tolerance)
    }

    fn analytic_derivative(&self, s: C64, order: usize) -> Option<Result<DMatrix<C64>>> {
        if !self.source.is_finite() {
            return None;
        }
        // d^j/ds^j 1/(s−λ) = (−1)^j j! / (s−λ)^{j+1}
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let factorial: f64 = (1..=order).map(|x| x as f64).product();
        let mut acc = DMatrix::<C64>::zeros(self.outputs, self.inputs);
        for n in 0..self.source.len() {
            let mode = self.source.get(n);
            let gap = s - mode.eigenvalue;
            if gap.norm() == 0.0 {
                return Some(Err(CoreError::AtEigenvalue(s)));
            }
            let w = gap.powu(order as u32 + 1).inv() * (sign * factorial);
            acc += DMatrix::from_fn(self.outputs, self.inputs, |i, j| w * (mode.output[i] * mode.input[j]));
        }
        Some(Ok(acc))
    }
}

impl Realization for ModalRealization {
    fn kind(&self) -> &str {
        &self.kind
    }

    fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    fn transfer(&self) -> &dyn TransferOracle {
        match &self.closed_form {
            Some(cf) => cf.as_ref(),
            None => &self.series,
        }
    }

    fn growth_bound(&self) -> f64 {
        self.growth_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn two_modes() -> ModalRealization {
        let modes = vec![
            Mode {
                eigenvalue: -1.0,
                input: vec![1.0],
                output: vec![2.0],
            },
            Mode {
                eigenvalue: -3.0,
                input: vec![1.0],
                output: vec![1.0],
            },
        ];
        ModalRealization::new("modal", ModeSource::Finite(modes), 10, None).unwrap()
    }

    #[test]
    fn finite_series_is_exact() {
        let r = two_modes();
        let s = c64(0.5, 0.25);
        let g = r.transfer_eval(s, 1e-12).unwrap()[(0, 0)];
        let expect = 2.0 / (s + 1.0) + 1.0 / (s + 3.0);
        assert!((g - expect).norm() < 1e-15);
    }

    #[test]
    fn resolvent_is_coefficientwise() {
        let r = two_modes();
        let s = c64(2.0, 0.0);
        let x = r.resolvent_apply(s, &DVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)])).unwrap();
        assert!((x[0] - c64(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert_eq!(x[1], c64(0.0, 0.0));
    }

    #[test]
    fn eigenvalue_is_rejected() {
        let r = two_modes();
        assert!(matches!(r.transfer_eval(c64(-3.0, 0.0), 1e-9), Err(CoreError::AtEigenvalue(_))));
    }

    #[test]
    fn derivative_of_finite_series() {
        let r = two_modes();
        let s = c64(1.0, 0.5);
        let d = r.transfer().derivative(s, 2).unwrap()[(0, 0)];
        let expect = 2.0 * 2.0 / (s + 1.0).powu(3) + 2.0 / (s + 3.0).powu(3);
        assert!((d - expect).norm() < 1e-13);
    }
}
