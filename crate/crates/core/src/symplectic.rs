//! Standard symplectic structure on `R^{2n}`, test functions and their
//! Hamiltonian fields, and the geometric isodrast invariants (action
//! integrals, isotropy residuals).

use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::flag::{DiscreteLoop, DiscreteTorusGrid};

/// `ω(u, v) = Σ (u_x v_y - u_y v_x)` without dimension checks.
#[inline]
pub fn omega(u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in (0..u.len()).step_by(2) {
        acc += u[k] * v[k + 1] - u[k + 1] * v[k];
    }
    acc
}

pub fn omega_eval(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(FlagError::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    if !u.len().is_multiple_of(2) {
        return Err(FlagError::DimensionMismatch { expected: u.len() + 1, got: u.len() });
    }
    Ok(omega(u, v))
}

/// `c · Π x_k^{e_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// `amp · exp(-|x - center|² / (2 width²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amp: f64,
}

impl Bump {
    fn value_and_factor(&self, x: &[f64]) -> (f64, f64) {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        let inv = 1.0 / (self.width * self.width);
        (self.amp * (-0.5 * r2 * inv).exp(), inv)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
struct TestFunctionDoc {
    #[serde(default)]
    poly: Vec<Monomial>,
    #[serde(default)]
    bumps: Vec<Bump>,
}

/// Polynomial plus Gaussian bumps on `R^{2n}`, with closed-form gradient.
///
/// The empty function is the zero function in every dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "TestFunctionDoc", into = "TestFunctionDoc")]
pub struct TestFunction {
    poly: Vec<Monomial>,
    bumps: Vec<Bump>,
}

impl TryFrom<TestFunctionDoc> for TestFunction {
    type Error = FlagError;

    fn try_from(doc: TestFunctionDoc) -> Result<Self> {
        Self::new(doc.poly, doc.bumps)
    }
}

impl From<TestFunction> for TestFunctionDoc {
    fn from(f: TestFunction) -> Self {
        Self { poly: f.poly, bumps: f.bumps }
    }
}

impl TestFunction {
    pub fn new(poly: Vec<Monomial>, bumps: Vec<Bump>) -> Result<Self> {
        let f = Self { poly, bumps };
        let mut dim = None;
        let dims = f
            .poly
            .iter()
            .map(|m| m.exponents.len())
            .chain(f.bumps.iter().map(|b| b.center.len()));
        for d in dims {
            if d == 0 || d % 2 != 0 {
                return Err(FlagError::InvalidInput(format!("term dimension {d} is not even")));
            }
            match dim {
                None => dim = Some(d),
                Some(e) if e != d => return Err(FlagError::DimensionMismatch { expected: e, got: d }),
                _ => {}
            }
        }
        for b in &f.bumps {
            if !(b.width > 0.0 && b.width.is_finite()) {
                return Err(FlagError::InvalidInput(format!("bump width {} must be positive", b.width)));
            }
        }
        Ok(f)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::default().with_monomial(vec![0; dim], c)
    }

    /// `Σ (x_i² + y_i²)/2`, whose flow rotates every plane clockwise at unit speed.
    pub fn rotation(dim: usize) -> Self {
        let mut f = Self::default();
        for k in 0..dim {
            let mut e = vec![0; dim];
            e[k] = 2;
            f = f.with_monomial(e, 0.5);
        }
        f
    }

    /// The coordinate function `x_k` (0-based over the interleaved coordinates).
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[k] = 1;
        Self::default().with_monomial(e, 1.0)
    }

    pub fn with_monomial(mut self, exponents: Vec<u32>, coeff: f64) -> Self {
        self.poly.push(Monomial { exponents, coeff });
        self
    }

    pub fn with_bump(mut self, center: Vec<f64>, width: f64, amp: f64) -> Self {
        assert!(width > 0.0, "bump width must be positive");
        self.bumps.push(Bump { center, width, amp });
        self
    }

    pub fn poly(&self) -> &[Monomial] {
        &self.poly
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// Ambient dimension, or `None` for the zero function.
    pub fn dim(&self) -> Option<usize> {
        self.poly
            .first()
            .map(|m| m.exponents.len())
            .or_else(|| self.bumps.first().map(|b| b.center.len()))
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != dim => Err(FlagError::DimensionMismatch { expected: dim, got: d }),
            _ => Ok(()),
        }
    }

    /// `α f + β g` as a single test function.
    pub fn linear_combination(alpha: f64, f: &Self, beta: f64, g: &Self) -> Self {
        let scale = |t: &Self, s: f64| {
            let poly = t.poly.iter().map(|m| Monomial { exponents: m.exponents.clone(), coeff: s * m.coeff });
            let bumps = t.bumps.iter().map(|b| Bump { center: b.center.clone(), width: b.width, amp: s * b.amp });
            (poly.collect::<Vec<_>>(), bumps.collect::<Vec<_>>())
        };
        let (mut p, mut b) = scale(f, alpha);
        let (p2, b2) = scale(g, beta);
        p.extend(p2);
        b.extend(b2);
        Self { poly: p, bumps: b }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for m in &self.poly {
            let mut term = m.coeff;
            for (xi, &e) in x.iter().zip(&m.exponents) {
                if e > 0 {
                    term *= xi.powi(e as i32);
                }
            }
            acc += term;
        }
        for b in &self.bumps {
            acc += b.value_and_factor(x).0;
        }
        acc
    }

    /// Writes `∇f(x)` into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for m in &self.poly {
            for k in 0..x.len() {
                let ek = m.exponents[k];
                if ek == 0 {
                    continue;
                }
                let mut term = m.coeff * ek as f64;
                for (j, (&xj, &ej)) in x.iter().zip(&m.exponents).enumerate() {
                    let p = if j == k { ej - 1 } else { ej };
                    if p > 0 {
                        term *= xj.powi(p as i32);
                    }
                }
                out[k] += term;
            }
        }
        for b in &self.bumps {
            let (v, inv) = b.value_and_factor(x);
            for k in 0..x.len() {
                out[k] -= v * inv * (x[k] - b.center[k]);
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Writes `X_f(x)` into `out`: per plane `(∂f/∂y, -∂f/∂x)`.
    pub fn hamiltonian_field_into(&self, x: &[f64], out: &mut [f64]) {
        self.gradient_into(x, out);
        for k in (0..out.len()).step_by(2) {
            let (gx, gy) = (out[k], out[k + 1]);
            out[k] = gy;
            out[k + 1] = -gx;
        }
    }
}

/// The Hamiltonian vector field `X_f` with `i_{X_f} ω = df`, evaluated at `x`.
pub fn hamiltonian_vf(f: &TestFunction, x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) {
        return Err(FlagError::DimensionMismatch { expected: x.len() + 1, got: x.len() });
    }
    f.check_dim(x.len())?;
    let mut out = vec![0.0; x.len()];
    f.hamiltonian_field_into(x, &mut out);
    Ok(out)
}

/// `∮ θ` along a closed polyline given as flat coordinates, with
/// `θ = ½ Σ (x dy - y dx)` evaluated at edge midpoints (exact shoelace).
pub fn polyline_action(dim: usize, coords: &[f64]) -> f64 {
    let n = coords.len() / dim;
    let mut acc = 0.0;
    for i in 0..n {
        let a = &coords[i * dim..(i + 1) * dim];
        let j = (i + 1) % n;
        let b = &coords[j * dim..(j + 1) * dim];
        acc += omega(a, b);
    }
    0.5 * acc
}

/// Action integral of a loop; the enclosed signed area for planar loops.
pub fn action_integral(curve: &DiscreteLoop) -> f64 {
    polyline_action(curve.dim(), curve.coords())
}

/// Largest `|ω(Δ_row, Δ_col)|` over grid cells: a discrete measure of `ι*ω`.
pub fn isotropy_residual(torus: &DiscreteTorusGrid) -> f64 {
    let mut worst = 0.0_f64;
    let mut dr = [0.0; 4];
    let mut dc = [0.0; 4];
    for i in 0..torus.rows() {
        for j in 0..torus.cols() {
            let p = torus.point(i, j);
            let pr = torus.point(i, j + 1);
            let pc = torus.point(i + 1, j);
            for k in 0..4 {
                dr[k] = pr[k] - p[k];
                dc[k] = pc[k] - p[k];
            }
            worst = worst.max(omega(&dr, &dc).abs());
        }
    }
    worst
}

/// Action integrals of the row-0 loop and the column-0 loop.
pub fn meridian_action_pair(torus: &DiscreteTorusGrid) -> (f64, f64) {
    let d = DiscreteTorusGrid::DIM;
    (polyline_action(d, &torus.row_loop(0)), polyline_action(d, &torus.column_loop(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn omega_basics() {
        assert_eq!(omega_eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(omega_eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert_eq!(omega_eval(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(omega_eval(&[1.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), Err(FlagError::DimensionMismatch { .. })));
    }

    #[test]
    fn hamiltonian_fields_closed_form() {
        let rot = TestFunction::rotation(2);
        assert_eq!(hamiltonian_vf(&rot, &[1.0, 0.0]).unwrap(), vec![0.0, -1.0]);
        let fx = TestFunction::coordinate(2, 0);
        assert_eq!(hamiltonian_vf(&fx, &[3.0, -7.0]).unwrap(), vec![0.0, -1.0]);
        let c = TestFunction::constant(2, 4.2);
        assert_eq!(hamiltonian_vf(&c, &[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert!(hamiltonian_vf(&rot, &[1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = TestFunction::default()
            .with_monomial(vec![2, 1, 0, 3], 0.7)
            .with_monomial(vec![0, 0, 1, 0], -1.3)
            .with_bump(vec![0.2, -0.1, 0.4, 0.0], 0.8, 1.5);
        let x = [0.3, -0.4, 0.9, 0.2];
        let g = f.gradient(&x);
        let h = 1e-6;
        for k in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "component {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn rejects_nonpositive_width_from_json() {
        let bad = r#"{"poly":[],"bumps":[{"center":[0,0],"width":0.0,"amp":1.0}]}"#;
        assert!(serde_json::from_str::<TestFunction>(bad).is_err());
        let good = r#"{"poly":[{"exponents":[2,0],"coeff":0.5}],"bumps":[{"center":[0,0],"width":1.0,"amp":1.0}]}"#;
        let f: TestFunction = serde_json::from_str(good).unwrap();
        assert_eq!(f.dim(), Some(2));
        assert!((f.eval(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_action() {
        let sq = DiscreteLoop::new(
            2,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.5], vec![0.0, 0.25], vec![0.0, 0.125], vec![0.0, 0.0625]]
                .iter()
                .cloned()
                .collect::<Vec<_>>(),
            vec![1.0; 8],
            vec![],
        )
        .unwrap();
        assert_eq!(action_integral(&sq), 1.0);
        // Four-vertex version via the raw polyline (loops require 8 vertices).
        let unit = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        assert_eq!(polyline_action(2, &unit), 1.0);
        let rev = [0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(polyline_action(2, &rev), -1.0);
    }

    #[test]
    fn inscribed_polygon_in_r4() {
        let c = DiscreteLoop::circle(4, 256, 1.0, |_| 1.0, vec![]).unwrap();
        let exact = 128.0 * (TAU / 256.0).sin();
        assert!((action_integral(&c) - exact).abs() < 1e-12);
        assert!((PI - exact) < 1e-3);
    }

    #[test]
    fn lagrangian_plane_loop_has_zero_action() {
        let c = DiscreteLoop::sample(4, 64, |t| vec![t.cos(), 0.0, t.sin(), 0.0], |_| 1.0, vec![]).unwrap();
        assert_eq!(action_integral(&c), 0.0);
    }

    #[test]
    fn product_torus_is_isotropic_and_has_circle_actions() {
        let t = DiscreteTorusGrid::product(1.0, 0.5, 32, 32, 1.0, vec![]).unwrap();
        assert!(isotropy_residual(&t) < 1e-2);
        let (a1, a2) = meridian_action_pair(&t);
        let poly = |r: f64| 0.5 * 32.0 * r * r * (TAU / 32.0).sin();
        assert!((a1 - poly(1.0)).abs() < 1e-12);
        assert!((a2 - poly(0.5)).abs() < 1e-12);
    }

    #[test]
    fn planar_grid_residual_is_cell_area() {
        // Grid in the (x1, y1) plane: cell (i, j) spans dx × dy.
        let t = DiscreteTorusGrid::sample(
            8,
            8,
            |a, b| [a + 0.3 * a.sin(), b, 0.0, 0.0],
            |_, _| 1.0,
            vec![],
        )
        .unwrap();
        let h = TAU / 8.0;
        let mut max_area = 0.0_f64;
        for i in 0..8 {
            for j in 0..8 {
                let p = t.point(i, j);
                let pr = t.point(i, j + 1);
                let pc = t.point(i + 1, j);
                max_area = max_area.max(((pr[0] - p[0]) * (pc[1] - p[1])).abs());
            }
        }
        assert!(max_area > 0.0);
        assert!((isotropy_residual(&t) - max_area).abs() < 1e-15);
        assert!(max_area >= h * h * 0.5);
    }

    #[test]
    fn flat_lagrangian_grid_is_degenerate() {
        let t = DiscreteTorusGrid::sample(8, 8, |a, b| [a.cos(), 0.0, b.sin(), 0.0], |_, _| 1.0, vec![]).unwrap();
        assert_eq!(isotropy_residual(&t), 0.0);
        assert_eq!(meridian_action_pair(&t), (0.0, 0.0));
    }
}
