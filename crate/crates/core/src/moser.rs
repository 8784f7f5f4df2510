//! Moser transport of densities on the circle with marked points.
//!
//! Two densities of one sign with equal arc masses are related by a
//! reparametrization fixing the marked vertices. On the circle this map is
//! the arc-by-arc inverse of the cumulative mass, which we invert exactly
//! for the piecewise-linear density inside each cell.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::quadrature;

/// Default relative tolerance on arc masses.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Degree-one monotone circle map given by the image parameter of each vertex.
///
/// Between vertices the map is extended linearly; `targets[i]` is kept within
/// one period of `θ_i` and the sequence is strictly increasing, closing up
/// with `targets[0] + 2π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMap {
    targets: Vec<f64>,
    fixed: Vec<usize>,
}

impl CircleMap {
    pub fn new(targets: Vec<f64>, fixed: Vec<usize>) -> Result<Self> {
        let map = Self { targets, fixed };
        map.check_monotone()?;
        let h = quadrature::spacing(map.len());
        for &m in &map.fixed {
            if m >= map.len() || map.targets[m] != m as f64 * h {
                return Err(FlagError::InvalidInput(format!("vertex {m} is declared fixed but moves")));
            }
        }
        Ok(map)
    }

    pub fn identity(n: usize, fixed: Vec<usize>) -> Self {
        let h = quadrature::spacing(n);
        Self { targets: (0..n).map(|i| i as f64 * h).collect(), fixed }
    }

    /// Rigid rotation by `angle`; fixes nothing unless `angle` is zero.
    pub fn rotation(n: usize, angle: f64) -> Self {
        let h = quadrature::spacing(n);
        Self { targets: (0..n).map(|i| i as f64 * h + angle).collect(), fixed: vec![] }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    fn target_ext(&self, i: usize) -> f64 {
        let n = self.len();
        self.targets[i % n] + TAU * (i / n) as f64
    }

    pub fn check_monotone(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(FlagError::InvalidInput("empty circle map".into()));
        }
        for i in 0..n {
            let (a, b) = (self.target_ext(i), self.target_ext(i + 1));
            if !(b > a) {
                return Err(FlagError::NonMonotone(i));
            }
        }
        Ok(())
    }

    /// Lift of the map to the real line, linear between vertices.
    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.len();
        let h = quadrature::spacing(n);
        let turns = (theta / TAU).floor();
        let local = theta - turns * TAU;
        let x = local / h;
        let i = (x.floor() as usize).min(n - 1);
        let s = x - i as f64;
        let (a, b) = (self.target_ext(i), self.target_ext(i + 1));
        a + s * (b - a) + turns * TAU
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &CircleMap) -> CircleMap {
        let targets = self.targets.iter().map(|&t| next.eval(t)).collect();
        let fixed = self.fixed.iter().copied().filter(|m| next.fixed.contains(m)).collect();
        CircleMap { targets, fixed }
    }

    /// Fourth-order centered-difference derivative at each vertex.
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.len();
        let h = quadrature::spacing(n);
        let g = |j: usize| self.target_ext(j);
        (0..n).map(|i| (8.0 * (g(i + n + 1) - g(i + n - 1)) - (g(i + n + 2) - g(i + n - 2))) / (12.0 * h)).collect()
    }

    /// Largest vertex displacement between two maps.
    pub fn sup_distance(&self, other: &CircleMap) -> f64 {
        self.targets.iter().zip(&other.targets).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Trapezoid mass of every arc between consecutive marked vertices.
pub fn arc_masses(density: &[f64], marked: &[usize]) -> Vec<f64> {
    quadrature::arc_masses(density, quadrature::spacing(density.len()), marked)
}

fn check_marks(n: usize, marked: &[usize]) -> Result<()> {
    if marked.windows(2).any(|w| w[0] >= w[1]) || marked.last().is_some_and(|&m| m >= n) {
        return Err(FlagError::InvalidInput(format!("marked indices {marked:?} must be sorted, distinct and below {n}")));
    }
    Ok(())
}

/// Same sign on both densities, nowhere zero, and equal arc masses within `tol`.
fn check_same_class(mu: &[f64], nu: &[f64], marked: &[usize], tol: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if mu.len() != nu.len() {
        return Err(FlagError::LengthMismatch { left: mu.len(), right: nu.len() });
    }
    check_marks(mu.len(), marked)?;
    let (sm, sn) = (quadrature::constant_sign(mu)?, quadrature::constant_sign(nu)?);
    if sm != sn {
        return Err(FlagError::SignMismatch);
    }
    let (am, an) = (arc_masses(mu, marked), arc_masses(nu, marked));
    for (arc, (a, b)) in am.iter().zip(&an).enumerate() {
        if (a - b).abs() > tol * a.abs().max(b.abs()) {
            return Err(FlagError::MassMismatch { arc, source_mass: *a, target_mass: *b });
        }
    }
    Ok((sm, am, an))
}

/// Reparametrization `g` fixing the marked vertices with `g_* μ = ν`.
///
/// On each arc, vertex `i` is sent to the parameter where the cumulative
/// mass of `ν` (exact for its piecewise-linear interpolant) reaches the
/// cumulative mass of `μ` at `θ_i`, rescaled by the arc-mass ratio so the
/// arc end lands exactly. An unmarked circle is anchored at vertex 0.
pub fn moser_map_circle(mu: &[f64], nu: &[f64], marked: &[usize], tol: f64) -> Result<CircleMap> {
    let (sign, am, an) = check_same_class(mu, nu, marked, tol)?;
    let n = mu.len();
    let h = quadrature::spacing(n);
    let mut targets = CircleMap::identity(n, vec![]).targets;
    for (j, (a, b)) in quadrature::arcs(n, marked).into_iter().enumerate() {
        let ratio = an[j] / am[j];
        let d = |v: &[f64], i: usize| sign * v[i % n];
        let mut src = 0.0;
        let mut k = a;
        let mut dst = 0.0;
        let mut dst_next = 0.5 * h * (d(nu, k) + d(nu, k + 1));
        for i in a + 1..b {
            src += 0.5 * h * (d(mu, i - 1) + d(mu, i));
            let m = src * ratio.abs();
            while dst_next < m && k + 1 < b {
                k += 1;
                dst = dst_next;
                dst_next += 0.5 * h * (d(nu, k) + d(nu, k + 1));
            }
            let r = (m - dst).max(0.0);
            let (rho0, rho1) = (d(nu, k), d(nu, k + 1));
            let qa = (rho1 - rho0) / (2.0 * h);
            let s = 2.0 * r / (rho0 + (rho0 * rho0 + 4.0 * qa * r).max(0.0).sqrt());
            let t = k as f64 * h + s.min(h);
            targets[i % n] = t - TAU * (i / n) as f64;
        }
    }
    let map = CircleMap { targets, fixed: marked.to_vec() };
    map.check_monotone()?;
    Ok(map)
}

/// Pushforward `ν` with `ν(g(θ)) g'(θ) = μ(θ)`, resampled on the grid.
///
/// `g'` is a five-point centered difference. The pushed values at the image
/// points are interpolated back onto the vertices by local cubics, then each
/// arc between fixed vertices is rescaled to the source arc mass so that
/// masses are preserved to rounding.
pub fn push_density(map: &CircleMap, mu: &[f64]) -> Result<Vec<f64>> {
    let n = map.len();
    if mu.len() != n {
        return Err(FlagError::LengthMismatch { left: n, right: mu.len() });
    }
    map.check_monotone()?;
    let h = quadrature::spacing(n);
    let dg = map.derivative();
    let vals: Vec<f64> = mu.iter().zip(&dg).map(|(m, g)| m / g).collect();
    let base = map.targets[0];
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for j in 0..n {
        let mut x = j as f64 * h;
        while x < base {
            x += TAU;
        }
        while x >= base + TAU {
            x -= TAU;
        }
        // knots are targets_ext(0..=n), increasing from base to base + 2π
        if j == 0 || map.target_ext(k) > x {
            k = 0;
        }
        while k + 1 < n && map.target_ext(k + 1) <= x {
            k += 1;
        }
        // cubic Lagrange through knots k-1..=k+2
        let knots: [f64; 4] = std::array::from_fn(|m| map.target_ext(k + n + m - 1) - TAU);
        let v: [f64; 4] = std::array::from_fn(|m| vals[(k + n + m - 1) % n]);
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - knots[b]) / (knots[a] - knots[b]);
                }
            }
            acc += w * v[a];
        }
        out.push(acc);
    }
    let targets = arc_masses(mu, &map.fixed);
    quadrature::match_arc_masses(&mut out, h, &map.fixed, &targets)?;
    Ok(out)
}

/// Convex combination `(1 - t) μ + t ν` of two densities in one class.
pub fn interpolation_path(mu: &[f64], nu: &[f64], marked: &[usize], t: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(FlagError::InvalidInput(format!("path parameter {t} outside [0, 1]")));
    }
    check_same_class(mu, nu, marked, DEFAULT_TOL)?;
    Ok(mu.iter().zip(nu).map(|(a, b)| (1.0 - t) * a + t * b).collect())
}

/// Tangential field `X = γ / μ` solving `L_X(μ dθ) = dγ` with `X = 0` at marks.
pub fn moser_vector_field(mu: &[f64], gamma: &[f64], marked: &[usize]) -> Result<Vec<f64>> {
    if mu.len() != gamma.len() {
        return Err(FlagError::LengthMismatch { left: mu.len(), right: gamma.len() });
    }
    check_marks(mu.len(), marked)?;
    quadrature::constant_sign(mu)?;
    for &m in marked {
        if gamma[m] != 0.0 {
            return Err(FlagError::ConstraintViolation { index: m, value: gamma[m] });
        }
    }
    Ok(gamma.iter().zip(mu).map(|(g, m)| g / m).collect())
}
