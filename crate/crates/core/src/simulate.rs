//! Truncated closed loops as one LTI system, exact exponential stepping,
//! decay fits and δ-perturbation sweeps.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{hstack, spectral_abscissa, vstack};
use crate::lti::{FinitePlant, Orientation};
use crate::pde::Realization;
use crate::synthesis::Design;

/// Norm above which a trajectory counts as diverged.
const OVERFLOW_NORM: f64 = 1e150;

/// A contiguous group of state coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

/// A linear readout `y = M x`.
#[derive(Debug, Clone)]
pub struct OutputMap {
    pub label: String,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    pub matrix: DMatrix<f64>,
    pub initial: DVector<f64>,
    pub blocks: Vec<Block>,
    pub outputs: Vec<OutputMap>,
    /// How the external input enters, one column per channel.
    pub input: DMatrix<f64>,
}

impl ClosedLoopSystem {
    fn new(matrix: DMatrix<f64>, input: DMatrix<f64>, blocks: &[(&str, usize)]) -> Self {
        let mut start = 0;
        let blocks = blocks
            .iter()
            .map(|&(label, len)| {
                let b = Block {
                    label: label.to_string(),
                    start,
                    len,
                };
                start += len;
                b
            })
            .collect();
        let n = matrix.nrows();
        ClosedLoopSystem {
            matrix,
            initial: DVector::zeros(n),
            blocks,
            outputs: Vec::new(),
            input,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    /// Sets the initial value of one block.
    pub fn set_initial(&mut self, label: &str, values: &[f64]) -> Result<()> {
        let b = self
            .block(label)
            .cloned()
            .ok_or_else(|| CoreError::Unknown {
                what: "state block",
                name: label.to_string(),
            })?;
        if values.len() != b.len {
            return Err(CoreError::DimensionMismatch(format!(
                "initial value of `{label}` has {} entries, expected {}",
                values.len(),
                b.len
            )));
        }
        self.initial.rows_mut(b.start, b.len).copy_from_slice(values);
        Ok(())
    }

    pub fn add_output(&mut self, label: impl Into<String>, matrix: DMatrix<f64>) -> Result<()> {
        if matrix.ncols() != self.dim() {
            return Err(CoreError::DimensionMismatch(format!(
                "output map has {} columns, expected {}",
                matrix.ncols(),
                self.dim()
            )));
        }
        self.outputs.push(OutputMap {
            label: label.into(),
            matrix,
        });
        Ok(())
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&self.matrix)
    }

    /// Appends an exosystem whose output drives input channel `channel`.
    /// Output maps are padded with zeros; the forcing itself is exposed as
    /// the output `forcing`.
    pub fn with_forcing(mut self, forcing: &Forcing, channel: usize) -> Result<Self> {
        let Some(exo) = forcing.exosystem() else {
            return Ok(self);
        };
        if channel >= self.input.ncols() {
            return Err(CoreError::config(
                "simulation.forcing.channel",
                format!("channel {channel} out of range, system has {} inputs", self.input.ncols()),
            ));
        }
        let (n, q) = (self.dim(), exo.matrix.nrows());
        let coupling = self.input.column(channel) * &exo.output;
        let top = hstack(&self.matrix, &coupling);
        let bottom = hstack(&DMatrix::zeros(q, n), &exo.matrix);
        self.matrix = vstack(&top, &bottom);
        self.initial = DVector::from_iterator(n + q, self.initial.iter().chain(exo.initial.iter()).copied());
        self.input = vstack(&self.input, &DMatrix::zeros(q, self.input.ncols()));
        for out in &mut self.outputs {
            out.matrix = hstack(&out.matrix, &DMatrix::zeros(out.matrix.nrows(), q));
        }
        self.blocks.push(Block {
            label: "exo".into(),
            start: n,
            len: q,
        });
        self.outputs.push(OutputMap {
            label: "forcing".into(),
            matrix: hstack(&DMatrix::zeros(1, n), &exo.output),
        });
        Ok(self)
    }
}

/// An external signal generated by a finite-dimensional exosystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Forcing {
    #[default]
    None,
    /// `amplitude · sin(frequency · t + phase)`.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `Σ coefficients[i] tⁱ`.
    Polynomial { coefficients: Vec<f64> },
}

/// `ξ' = Sξ`, forcing `= hξ`.
#[derive(Debug, Clone)]
pub struct Exosystem {
    pub matrix: DMatrix<f64>,
    pub initial: DVector<f64>,
    pub output: DMatrix<f64>,
}

impl Forcing {
    pub fn exosystem(&self) -> Option<Exosystem> {
        match self {
            Forcing::None => None,
            Forcing::Sine {
                amplitude,
                frequency,
                phase,
            } => Some(Exosystem {
                matrix: DMatrix::from_row_slice(2, 2, &[0.0, *frequency, -frequency, 0.0]),
                initial: DVector::from_vec(vec![amplitude * phase.sin(), amplitude * phase.cos()]),
                output: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            }),
            Forcing::Polynomial { coefficients } if coefficients.is_empty() => None,
            Forcing::Polynomial { coefficients } => {
                // yᵢ = tⁱ/i!, a nilpotent chain
                let q = coefficients.len();
                let mut factorial = 1.0;
                let output = DMatrix::from_fn(1, q, |_, i| {
                    if i > 0 {
                        factorial *= i as f64;
                    }
                    coefficients[i] * factorial
                });
                Some(Exosystem {
                    matrix: DMatrix::from_fn(q, q, |i, j| if j + 1 == i { 1.0 } else { 0.0 }),
                    initial: DVector::from_fn(q, |i, _| if i == 0 { 1.0 } else { 0.0 }),
                    output,
                })
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Forcing::None => 0.0,
            Forcing::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            Forcing::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }
}

/// Accepts an empty matrix as the zero matrix of the expected shape.
fn fit(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(DMatrix::zeros(rows, cols));
    }
    if m.shape() != (rows, cols) {
        return Err(CoreError::DimensionMismatch(format!(
            "design gain {name}: expected {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.clone())
}

fn blocks2(m: [[&DMatrix<f64>; 2]; 2]) -> DMatrix<f64> {
    vstack(&hstack(m[0][0], m[0][1]), &hstack(m[1][0], m[1][1]))
}

/// One square matrix for plant, PDE truncation and design. The PDE block
/// is scaled to `(1+δ)A`; controller and observer copies keep the nominal
/// `A`.
pub fn assemble_closed_loop(
    plant: &FinitePlant,
    pde: &dyn Realization,
    design: Option<&Design>,
    delta: f64,
) -> Result<ClosedLoopSystem> {
    if !(delta > -1.0) {
        return Err(CoreError::config("sweep", format!("δ = {delta} must exceed -1")));
    }
    plant.check_interface(pde.inputs(), pde.outputs())?;
    if let Some(d) = design {
        if d.orientation() != plant.orientation {
            return Err(CoreError::config(
                "design.mode",
                format!("{} design on a {} cascade", d.mode(), plant.orientation.as_str()),
            ));
        }
    }
    let tr = pde.truncation();
    let (n, nz) = (plant.dim(), tr.dim());
    let a = tr.a.to_dense();
    let a_pert = &a * (1.0 + delta);
    let (b, c) = (&tr.b, &tr.c);
    let (m, p) = (pde.inputs(), pde.outputs());
    let zero = |r: usize, c: usize| DMatrix::<f64>::zeros(r, c);

    match plant.orientation {
        Orientation::Actuator => {
            let j = plant.j.clone().unwrap_or_else(|| zero(n, m));
            let fc = &plant.f * c;
            let y = hstack(&plant.g, &(&plant.h * c));
            let input = vstack(&j, b);
            let sys = match design {
                None => {
                    let mut s = ClosedLoopSystem::new(
                        blocks2([[&plant.e, &fc], [&zero(nz, n), &a_pert]]),
                        input,
                        &[("w", n), ("z", nz)],
                    );
                    s.add_output("y", y)?;
                    s
                }
                Some(Design::StateFeedback { k1, k2 }) => {
                    let k1 = fit("k1", k1, m, n)?;
                    let k2 = fit("k2", k2, m, nz)?;
                    let mat = blocks2([
                        [&(&plant.e + &j * &k1), &(&fc + &j * &k2)],
                        [&(b * &k1), &(&a_pert + b * &k2)],
                    ]);
                    let mut s = ClosedLoopSystem::new(mat, input, &[("w", n), ("z", nz)]);
                    s.add_output("y", y)?;
                    s.add_output("u", hstack(&k1, &k2))?;
                    s
                }
                Some(Design::OutputFeedback { k1, k2, l }) => {
                    let k1 = fit("k1", k1, m, n)?;
                    let k2 = fit("k2", k2, m, nz)?;
                    let l = fit("l", l, n, plant.g.nrows())?;
                    let (jk1, jk2, bk1, bk2) = (&j * &k1, &j * &k2, b * &k1, b * &k2);
                    let ac11 = &plant.e + &l * &plant.g + &jk1;
                    let ac12 = (&plant.f + &l * &plant.h) * c + &jk2;
                    let top = hstack(
                        &blocks2([[&plant.e, &fc], [&zero(nz, n), &a_pert]]),
                        &blocks2([[&jk1, &jk2], [&bk1, &bk2]]),
                    );
                    let bottom = hstack(
                        &vstack(&(-(&l * &y)), &zero(nz, n + nz)),
                        &blocks2([[&ac11, &ac12], [&bk1, &(&a + &bk2)]]),
                    );
                    let mut s = ClosedLoopSystem::new(
                        vstack(&top, &bottom),
                        vstack(&input, &input),
                        &[("w", n), ("z", nz), ("w_hat", n), ("z_hat", nz)],
                    );
                    s.add_output("y", hstack(&y, &zero(y.nrows(), n + nz)))?;
                    s.add_output("u", hstack(&zero(m, n + nz), &hstack(&k1, &k2)))?;
                    s
                }
                Some(Design::Observer { .. }) => unreachable!("orientation checked above"),
            };
            Ok(sys)
        }
        Orientation::Sensor => {
            let j = plant.j.clone().unwrap_or_else(|| zero(p, n));
            let bg = b * &plant.g;
            let y = hstack(&j, c);
            let input = vstack(&plant.f, &(b * &plant.h));
            let plant_block = blocks2([[&plant.e, &zero(n, nz)], [&bg, &a_pert]]);
            match design {
                None => {
                    let mut s = ClosedLoopSystem::new(plant_block, input, &[("w", n), ("z", nz)]);
                    s.add_output("y", y)?;
                    Ok(s)
                }
                Some(Design::Observer { ltilde, pi2l }) => {
                    let ltilde = fit("ltilde", ltilde, n, p)?;
                    let pi2l = fit("pi2l", pi2l, nz, p)?;
                    let gain = vstack(&ltilde, &pi2l);
                    let a_o = blocks2([[&(&plant.e + &ltilde * &j), &(&ltilde * c)], [&(&bg + &pi2l * &j), &(&a + &pi2l * c)]]);
                    // x̂' = A_o x̂ − gain·y + input·u with y = [J C] x
                    let top = hstack(&plant_block, &zero(n + nz, n + nz));
                    let bottom = hstack(&(-(&gain * &y)), &a_o);
                    let dim = n + nz;
                    let mut s = ClosedLoopSystem::new(
                        vstack(&top, &bottom),
                        vstack(&input, &input),
                        &[("w", n), ("z", nz), ("w_hat", n), ("z_hat", nz)],
                    );
                    s.add_output("y", hstack(&y, &zero(p, dim)))?;
                    let eye = DMatrix::<f64>::identity(dim, dim);
                    s.add_output("error", hstack(&(-&eye), &eye))?;
                    let mut ew = zero(n, 2 * dim);
                    ew.view_mut((0, 0), (n, n)).fill_with_identity();
                    ew.view_mut((0, 0), (n, n)).neg_mut();
                    ew.view_mut((0, dim), (n, n)).fill_with_identity();
                    s.add_output("error_w", ew)?;
                    Ok(s)
                }
                Some(_) => unreachable!("orientation checked above"),
            }
        }
    }
}

/// Snapshots on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub blocks: Vec<Block>,
    pub outputs: Vec<OutputMap>,
    /// Time at which the state diverged; the trajectory stops there.
    pub overflow: Option<f64>,
    /// Spectral abscissa of the stepped matrix.
    pub abscissa: f64,
}

impl Trajectory {
    /// Values of a state block or output at every snapshot.
    pub fn signal(&self, label: &str) -> Result<Vec<DVector<f64>>> {
        if let Some(b) = self.blocks.iter().find(|b| b.label == label) {
            return Ok(self.states.iter().map(|x| x.rows(b.start, b.len).clone_owned()).collect());
        }
        if let Some(o) = self.outputs.iter().find(|o| o.label == label) {
            return Ok(self.states.iter().map(|x| &o.matrix * x).collect());
        }
        Err(CoreError::Unknown {
            what: "signal",
            name: label.to_string(),
        })
    }

    pub fn norms(&self, label: &str) -> Result<Vec<f64>> {
        Ok(self.signal(label)?.iter().map(|v| v.norm()).collect())
    }

    /// CSV with a header row: `t`, every state entry as `label[i]`, then
    /// every output entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for b in &self.blocks {
            header.extend((0..b.len).map(|i| format!("{}[{i}]", b.label)));
        }
        for o in &self.outputs {
            header.extend((0..o.matrix.nrows()).map(|i| format!("{}[{i}]", o.label)));
        }
        writeln!(out, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![format!("{t}")];
            row.extend(x.iter().map(|v| format!("{v:e}")));
            for o in &self.outputs {
                row.extend((&o.matrix * x).iter().map(|v| format!("{v:e}")));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Exact stepping `x_{k+1} = e^{Mh} x_k`.
pub fn integrate(sys: &ClosedLoopSystem, horizon: f64, h: f64) -> Result<Trajectory> {
    if !(h > 0.0) || !(horizon >= h) {
        return Err(CoreError::config(
            "simulation",
            format!("need step > 0 and horizon >= step, got step {h}, horizon {horizon}"),
        ));
    }
    if sys.matrix.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::DimensionMismatch("closed-loop matrix has non-finite entries".into()));
    }
    let steps = (horizon / h).round() as usize;
    let phi = (&sys.matrix * h).exp();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = sys.initial.clone();
    let mut overflow = None;
    times.push(0.0);
    states.push(x.clone());
    for k in 1..=steps {
        x = &phi * x;
        let t = k as f64 * h;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > OVERFLOW_NORM {
            overflow = Some(t);
            break;
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        blocks: sys.blocks.clone(),
        outputs: sys.outputs.clone(),
        overflow,
        abscissa: sys.spectral_abscissa()?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub label: String,
    /// Least-squares slope of `log‖x(t)‖` over the second half.
    pub rate: f64,
    pub peak: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Spectral abscissa of the simulated matrix.
    pub abscissa: f64,
}

impl DecayReport {
    pub fn final_ratio(&self) -> f64 {
        self.final_norm / self.initial_norm
    }
}

pub fn fit_decay_rate(traj: &Trajectory, label: &str) -> Result<DecayReport> {
    let norms = traj.norms(label)?;
    let peak = norms.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(CoreError::DegenerateTrajectory(label.to_string()));
    }
    let half = norms.len() / 2;
    let tail: Vec<(f64, f64)> = traj.times[half..]
        .iter()
        .zip(&norms[half..])
        .filter(|(_, &v)| v > f64::MIN_POSITIVE)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if tail.len() < 2 {
        return Err(CoreError::DegenerateTrajectory(label.to_string()));
    }
    let count = tail.len() as f64;
    let mt = tail.iter().map(|p| p.0).sum::<f64>() / count;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = tail.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = tail.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    Ok(DecayReport {
        label: label.to_string(),
        rate: sxy / sxx,
        peak,
        initial_norm: norms[0],
        final_norm: *norms.last().unwrap(),
        abscissa: traj.abscissa,
    })
}

/// Sweep grid over δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    /// Bisection width at the stability boundary.
    pub refine: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            min: -0.5,
            max: 0.5,
            steps: 41,
            refine: 1e-3,
        }
    }
}

impl SweepGrid {
    /// Grid points in increasing order, with 0 included.
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.steps == 0 || !(self.min <= self.max) || !(self.min > -1.0) {
            return Err(CoreError::config(
                "sweep",
                format!(
                    "need min <= max, min > -1 and steps >= 1, got {}:{}:{}",
                    self.min, self.max, self.steps
                ),
            ));
        }
        let mut pts: Vec<f64> = if self.steps == 1 {
            vec![self.min]
        } else {
            let dx = (self.max - self.min) / (self.steps - 1) as f64;
            (0..self.steps).map(|i| self.min + i as f64 * dx).collect()
        };
        for p in &mut pts {
            if p.abs() < 1e-12 {
                *p = 0.0;
            }
        }
        if !pts.contains(&0.0) {
            pts.push(0.0);
            pts.sort_by(f64::total_cmp);
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub abscissa: f64,
    pub stable: bool,
    /// Added by boundary bisection.
    pub refined: bool,
}

/// Maximal stable interval containing 0. A censored endpoint is the end of
/// the grid, not a detected stability boundary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StableInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_censored: bool,
    pub upper_censored: bool,
}

impl StableInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// `None` when the nominal design is itself unstable.
    pub interval: Option<StableInterval>,
}

/// Certified spectral abscissa of the perturbed loop over a δ grid.
pub fn delta_sweep(plant: &FinitePlant, pde: &dyn Realization, design: &Design, grid: &SweepGrid) -> Result<SweepReport> {
    if matches!(design, Design::Observer { .. }) {
        return Err(CoreError::config(
            "design.mode",
            "δ-sweeps apply to feedback designs; observer error dynamics do not depend on the PDE perturbation",
        ));
    }
    let probe = |delta: f64, refined: bool| -> Result<SweepPoint> {
        let abscissa = assemble_closed_loop(plant, pde, Some(design), delta)?.spectral_abscissa()?;
        Ok(SweepPoint {
            delta,
            abscissa,
            stable: abscissa < 0.0,
            refined,
        })
    };
    let mut points = grid
        .points()?
        .into_iter()
        .map(|d| probe(d, false))
        .collect::<Result<Vec<_>>>()?;
    let zero = points.iter().position(|p| p.delta == 0.0).expect("grid contains 0");
    if !points[zero].stable {
        return Ok(SweepReport { points, interval: None });
    }
    let mut hi = zero;
    while hi + 1 < points.len() && points[hi + 1].stable {
        hi += 1;
    }
    let mut lo = zero;
    while lo > 0 && points[lo - 1].stable {
        lo -= 1;
    }
    let mut extra = Vec::new();
    let mut bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
        while (outside - inside).abs() > grid.refine {
            let mid = 0.5 * (inside + outside);
            let p = probe(mid, true)?;
            extra.push(p);
            if p.stable {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    let upper_censored = hi + 1 == points.len();
    let upper = if upper_censored {
        points[hi].delta
    } else {
        bisect(points[hi].delta, points[hi + 1].delta)?
    };
    let lower_censored = lo == 0;
    let lower = if lower_censored {
        points[lo].delta
    } else {
        bisect(points[lo].delta, points[lo - 1].delta)?
    };
    points.extend(extra);
    points.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(SweepReport {
        points,
        interval: Some(StableInterval {
            lower,
            upper,
            lower_censored,
            upper_censored,
        }),
    })
}
