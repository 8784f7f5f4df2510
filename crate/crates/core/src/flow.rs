//! Fixed-step transport of flags along vector fields.
//!
//! Every position of a flag (points, loop vertices, grid points) is advanced
//! independently by the same one-step map, so a point sitting on a marked
//! vertex receives bit-identical updates and nesting stays exact. Densities
//! and weights are material constants: they ride along unchanged.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::flag::{self, component_masses, nesting_residual, FlagLevels, WeightedFlag};
use crate::symplectic::{self, TestFunction};

/// A time-independent vector field on `R^dim`.
pub trait VectorField: Sync {
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// `X_f` for a test function `f`.
pub struct HamiltonianField<'a>(pub &'a TestFunction);

impl VectorField for HamiltonianField<'_> {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.0.hamiltonian_field_into(x, out);
    }
}

/// `x ↦ A x` for a square matrix `A` given row-major.
pub struct LinearField {
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl LinearField {
    /// `x ↦ rate · x`; its time-1 flow scales by `exp(rate)`.
    pub fn scaling(dim: usize, rate: f64) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for k in 0..dim {
            matrix[k * dim + k] = rate;
        }
        Self { dim, matrix }
    }
}

impl VectorField for LinearField {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.matrix[r * self.dim..(r + 1) * self.dim].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Rk4,
    /// Implicit midpoint rule, solved by fixed-point iteration.
    Midpoint,
}

impl FromStr for Scheme {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "midpoint" => Ok(Self::Midpoint),
            other => Err(FlagError::InvalidInput(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Scratch buffers for one-point steps.
pub struct Stepper {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

const MIDPOINT_MAX_ITERS: usize = 100;

impl Stepper {
    pub fn new(dim: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; dim]), tmp: vec![0.0; dim] }
    }

    /// Advance `x` by one step of size `dt`.
    pub fn step<F: VectorField + ?Sized>(&mut self, field: &F, scheme: Scheme, x: &mut [f64], dt: f64) {
        let d = x.len();
        match scheme {
            Scheme::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                field.eval(x, k1);
                for i in 0..d {
                    self.tmp[i] = x[i] + 0.5 * dt * k1[i];
                }
                field.eval(&self.tmp, k2);
                for i in 0..d {
                    self.tmp[i] = x[i] + 0.5 * dt * k2[i];
                }
                field.eval(&self.tmp, k3);
                for i in 0..d {
                    self.tmp[i] = x[i] + dt * k3[i];
                }
                field.eval(&self.tmp, k4);
                for i in 0..d {
                    x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            Scheme::Midpoint => {
                let [guess, vel, _, _] = &mut self.k;
                field.eval(x, vel);
                for i in 0..d {
                    guess[i] = x[i] + dt * vel[i];
                }
                for _ in 0..MIDPOINT_MAX_ITERS {
                    for i in 0..d {
                        self.tmp[i] = 0.5 * (x[i] + guess[i]);
                    }
                    field.eval(&self.tmp, vel);
                    let mut change = 0.0_f64;
                    let mut scale = 0.0_f64;
                    for i in 0..d {
                        let next = x[i] + dt * vel[i];
                        change = change.max((next - guess[i]).abs());
                        scale = scale.max(next.abs());
                        guess[i] = next;
                    }
                    if change <= 1e-15 * (1.0 + scale) {
                        break;
                    }
                }
                x.copy_from_slice(guess);
            }
        }
    }
}

/// Time-`t` flow map of a single point, `steps` uniform steps.
pub fn flow_point<F: VectorField + ?Sized>(field: &F, scheme: Scheme, x: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut stepper = Stepper::new(x.len());
    let dt = t / steps as f64;
    for _ in 0..steps {
        stepper.step(field, scheme, &mut y, dt);
    }
    y
}

/// Conserved-quantity drift record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub name: String,
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_value: f64,
    pub relative_drift: f64,
}

impl DriftRecord {
    fn new(name: impl Into<String>, initial: f64, final_value: f64) -> Self {
        let diff = (final_value - initial).abs();
        let relative_drift = if diff == 0.0 { 0.0 } else { diff / initial.abs().max(f64::MIN_POSITIVE) };
        Self { name: name.into(), initial, final_value, relative_drift }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub steps: usize,
    pub dt: f64,
    pub max_displacement: Vec<f64>,
    pub final_nesting_residual: f64,
    pub drift: Vec<DriftRecord>,
}

impl FlowDiagnostics {
    pub fn drift_of(&self, name: &str) -> Option<&DriftRecord> {
        self.drift.iter().find(|d| d.name == name)
    }
}

/// Named scalar invariants tracked along flows.
pub fn tracked_invariants(flag: &WeightedFlag) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    match flag.levels() {
        FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => {
            out.push(("action_integral".to_string(), symplectic::action_integral(c)));
        }
        FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => {
            let (a, b) = symplectic::meridian_action_pair(t);
            out.push(("meridian_action_row".to_string(), a));
            out.push(("meridian_action_column".to_string(), b));
        }
        FlagLevels::Points(_) => {}
    }
    for (lvl, masses) in component_masses(flag).levels.iter().enumerate() {
        for (k, m) in masses.iter().enumerate() {
            out.push((format!("mass[{lvl}][{k}]"), *m));
        }
    }
    out.push(("nesting_residual".to_string(), nesting_residual(flag)));
    out
}

fn min_edge(flag: &WeightedFlag) -> Option<f64> {
    match flag.levels() {
        FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => Some(c.min_edge_length()),
        FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => Some(t.min_edge_length()),
        FlagLevels::Points(_) => None,
    }
}

/// Largest single-step displacement allowed, as a fraction of the minimum edge.
pub const MAX_STEP_FRACTION: f64 = 0.1;
/// Upper bound on the number of steps in one transport call.
pub const MAX_STEPS: f64 = 1e8;

/// Transport a flag along an arbitrary vector field.
///
/// `observer` is called with `(step, t, flag)` at step 0 and after every
/// `every` steps (and at the final step).
pub fn transport<F: VectorField + ?Sized>(
    flag: &WeightedFlag,
    field: &F,
    t_final: f64,
    dt: f64,
    scheme: Scheme,
    every: usize,
    mut observer: impl FnMut(usize, f64, &WeightedFlag),
) -> Result<(WeightedFlag, FlowDiagnostics)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlagError::InvalidInput(format!("dt = {dt} must be positive")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(FlagError::InvalidInput(format!("T = {t_final} must be nonnegative")));
    }
    let ratio = t_final / dt;
    if ratio > MAX_STEPS {
        return Err(FlagError::InvalidInput(format!("T/dt = {ratio:e} exceeds {MAX_STEPS:e}")));
    }
    let steps = (ratio - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    let dim = flag.dim();
    let limit = min_edge(flag).map(|e| MAX_STEP_FRACTION * e);

    let before = tracked_invariants(flag);
    let mut state = flag.positions();
    let mut stepper = Stepper::new(dim);
    let mut prev = vec![0.0; dim];
    let mut max_displacement = Vec::with_capacity(steps);
    let every = every.max(1);
    observer(0, 0.0, flag);
    for s in 0..steps {
        let mut worst = 0.0_f64;
        for x in state.chunks_mut(dim) {
            prev.copy_from_slice(x);
            stepper.step(field, scheme, x, h);
            worst = worst.max(flag::dist(&prev, x));
        }
        if let Some(limit) = limit {
            if worst > limit {
                return Err(FlagError::StepTooLarge { step: s, displacement: worst, limit });
            }
        }
        max_displacement.push(worst);
        if (s + 1) % every == 0 || s + 1 == steps {
            observer(s + 1, (s + 1) as f64 * h, &flag.with_positions(&state));
        }
    }
    let out = flag.with_positions(&state);
    let after = tracked_invariants(&out);
    let drift = before
        .into_iter()
        .zip(after)
        .map(|((name, a), (_, b))| DriftRecord::new(name, a, b))
        .collect();
    let diagnostics = FlowDiagnostics {
        steps,
        dt: h,
        max_displacement,
        final_nesting_residual: nesting_residual(&out),
        drift,
    };
    Ok((out, diagnostics))
}

/// Transport a flag by the Hamiltonian flow of `f` for time `t_final`.
pub fn flow_flag(
    flag: &WeightedFlag,
    f: &TestFunction,
    t_final: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<(WeightedFlag, FlowDiagnostics)> {
    f.check_dim(flag.dim())?;
    transport(flag, &HamiltonianField(f), t_final, dt, scheme, usize::MAX, |_, _, _| {})
}
