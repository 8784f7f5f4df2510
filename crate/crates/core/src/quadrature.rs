//! Trapezoidal quadrature on uniform periodic grids.
//!
//! A closed curve with `n` vertices is parametrized by `θ ∈ [0, 2π)` with
//! spacing `2π/n`. Densities are sampled per vertex and interpreted as the
//! piecewise-linear interpolant, so the trapezoid prefix sums below are the
//! exact cumulative mass of that interpolant.

use std::f64::consts::TAU;

use crate::error::{FlagError, Result};

/// Parameter spacing of a uniform periodic grid with `n` nodes.
pub fn spacing(n: usize) -> f64 {
    TAU / n as f64
}

/// Periodic trapezoid rule: every node carries full weight.
pub fn periodic_sum(values: &[f64], h: f64) -> f64 {
    h * values.iter().sum::<f64>()
}

/// Cumulative mass at each node, `out[i] = ∫_0^{θ_i}`, with `out[n]` the total.
pub fn cumulative(density: &[f64], h: f64) -> Vec<f64> {
    let n = density.len();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..n {
        acc += 0.5 * h * (density[i] + density[(i + 1) % n]);
        out.push(acc);
    }
    out
}

/// Trapezoid mass of the arc running forward from node `a` to node `b`.
///
/// `b` may exceed `n` to express wraparound; `b == a + n` is the full loop.
pub fn arc_mass(density: &[f64], h: f64, a: usize, b: usize) -> f64 {
    let n = density.len();
    debug_assert!(b > a && b - a <= n);
    let mut acc = 0.5 * (density[a % n] + density[b % n]);
    for i in a + 1..b {
        acc += density[i % n];
    }
    h * acc
}

/// Arcs `(start, end)` between consecutive marked nodes, end unwrapped past `n`.
/// An unmarked loop is a single arc anchored at node 0.
pub fn arcs(n: usize, marked: &[usize]) -> Vec<(usize, usize)> {
    if marked.is_empty() {
        return vec![(0, n)];
    }
    let k = marked.len();
    (0..k)
        .map(|j| {
            let a = marked[j];
            let b = if j + 1 < k { marked[j + 1] } else { marked[0] + n };
            (a, b)
        })
        .collect()
}

/// Trapezoid masses of every arc between consecutive marked nodes.
pub fn arc_masses(density: &[f64], h: f64, marked: &[usize]) -> Vec<f64> {
    arcs(density.len(), marked)
        .into_iter()
        .map(|(a, b)| arc_mass(density, h, a, b))
        .collect()
}

/// Rescale interior nodes of each arc so its trapezoid mass hits `targets`.
///
/// Marked nodes are shared between neighbouring arcs and are left untouched.
pub fn match_arc_masses(
    density: &mut [f64],
    h: f64,
    marked: &[usize],
    targets: &[f64],
) -> Result<()> {
    let n = density.len();
    let arcs = arcs(n, marked);
    if marked.is_empty() {
        let total = periodic_sum(density, h);
        let s = targets[0] / total;
        if !(s.is_finite() && s > 0.0) {
            return Err(FlagError::SignError("mass correction flips sign".into()));
        }
        density.iter_mut().for_each(|d| *d *= s);
        return Ok(());
    }
    for (j, &(a, b)) in arcs.iter().enumerate() {
        if b - a < 2 {
            return Err(FlagError::TooCoarse {
                requested: n,
                reason: format!("arc {j} has no interior vertex"),
            });
        }
        let ends = if b - a == n {
            density[a % n]
        } else {
            0.5 * (density[a % n] + density[b % n])
        };
        let interior: f64 = (a + 1..b).map(|i| density[i % n]).sum();
        let s = (targets[j] / h - ends) / interior;
        if !(s.is_finite() && s > 0.0) {
            return Err(FlagError::SignError(format!(
                "mass correction on arc {j} flips sign"
            )));
        }
        for i in a + 1..b {
            density[i % n] *= s;
        }
    }
    Ok(())
}

/// Check that all entries are nonzero and share one sign; returns that sign.
pub fn constant_sign(values: &[f64]) -> Result<f64> {
    let first = *values
        .first()
        .ok_or_else(|| FlagError::SignError("empty density".into()))?;
    let sign = first.signum();
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(FlagError::InvalidInput(format!("non-finite density at {i}")));
        }
        if v == 0.0 || v.signum() != sign {
            return Err(FlagError::SignError(format!(
                "entry {i} = {v} breaks constant nonzero sign"
            )));
        }
    }
    Ok(sign)
}

/// Centered periodic difference `(v[i+1] - v[i-1]) / 2h`.
pub fn centered_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * h))
        .collect()
}
