//! Seeded generators for flags, densities, test functions and speed fields.
//!
//! Everything random in the crate is drawn here from a `ChaCha8Rng` seeded
//! with a `u64`, so identical seeds give bitwise identical objects. Loop
//! recipes are analytic and can be sampled at any resolution; marked
//! vertices sit at multiples of `1/16` of the circle so that refinement by
//! powers of two keeps them on the grid.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FlagError, Result};
use crate::flag::{DiscreteLoop, WeightedFlag, WeightedPointSet};
use crate::quadrature;
use crate::symplectic::TestFunction;

/// Marked positions are chosen among this many equally spaced parameters.
pub const MARK_SLOTS: usize = 16;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real trigonometric polynomial `Σ_k a_k cos kθ + b_k sin kθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fourier {
    pub coeffs: Vec<(f64, f64)>,
}

impl Fourier {
    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![(c, 0.0)] }
    }

    /// Mean `mean`, modes `1..=modes` with amplitudes up to `amp / k`.
    pub fn random<R: Rng>(rng: &mut R, mean: f64, modes: usize, amp: f64) -> Self {
        let mut coeffs = vec![(mean, 0.0)];
        for k in 1..=modes {
            let s = amp / k as f64;
            coeffs.push((rng.gen_range(-s..s), rng.gen_range(-s..s)));
        }
        Self { coeffs }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let kt = k as f64 * t;
                a * kt.cos() + b * kt.sin()
            })
            .sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let kf = k as f64;
                kf * (b * (kf * t).cos() - a * (kf * t).sin())
            })
            .sum()
    }
}

/// Marked vertex indices for mark slots at resolution `n` (a multiple of 16).
pub fn marks_at(n: usize, slots: &[usize]) -> Result<Vec<usize>> {
    if !n.is_multiple_of(MARK_SLOTS) {
        return Err(FlagError::InvalidInput(format!("resolution {n} is not a multiple of {MARK_SLOTS}")));
    }
    Ok(slots.iter().map(|s| s * n / MARK_SLOTS).collect())
}

/// `k` distinct sorted mark slots.
pub fn random_slots<R: Rng>(rng: &mut R, k: usize) -> Vec<usize> {
    let mut slots: Vec<usize> = rand::seq::index::sample(rng, MARK_SLOTS, k.min(MARK_SLOTS)).into_vec();
    slots.sort_unstable();
    slots
}

/// Analytic star-shaped planar loop with density and weighted marked points.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRecipe {
    pub dim: usize,
    pub radius: Fourier,
    pub density: Fourier,
    pub slots: Vec<usize>,
    pub weights: Vec<f64>,
}

impl LoopRecipe {
    /// `k` weighted points on a smooth star-shaped loop in the first plane.
    pub fn random(seed: u64, dim: usize, k: usize) -> Self {
        let mut rng = rng(seed ^ 0x100b_f1a9);
        let radius = Fourier::random(&mut rng, 1.0, 3, 0.12);
        let density = Fourier::random(&mut rng, 1.0, 3, 0.3);
        let slots = random_slots(&mut rng, k);
        let weights = slots.iter().map(|_| rng.gen_range(0.5..2.0)).collect();
        Self { dim, radius, density, slots, weights }
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        let r = self.radius.eval(t);
        let mut p = vec![0.0; self.dim];
        p[0] = r * t.cos();
        p[1] = r * t.sin();
        // out-of-plane wiggle keeps higher-dimensional loops non-planar
        for k in (2..self.dim).step_by(2) {
            p[k] = 0.1 * (t * k as f64).sin();
            p[k + 1] = 0.1 * (t * (k as f64 - 1.0)).cos();
        }
        p
    }

    pub fn curve(&self, n: usize) -> Result<DiscreteLoop> {
        DiscreteLoop::sample(self.dim, n, |t| self.point(t), |t| self.density.eval(t), vec![])
    }

    pub fn flag(&self, n: usize) -> Result<WeightedFlag> {
        let curve = self.curve(n)?;
        if self.slots.is_empty() {
            return Ok(WeightedFlag::single_loop(curve));
        }
        let marks = marks_at(n, &self.slots)?;
        let pos: Vec<Vec<f64>> = marks.iter().map(|&m| curve.vertex(m).to_vec()).collect();
        let points = WeightedPointSet::new(self.dim, &pos, self.weights.clone())?;
        WeightedFlag::points_in_loop(points, curve, 1e-12)
    }
}

/// Quadratic-plus-bump test function with coefficients of size `scale`.
pub fn random_test_function<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> TestFunction {
    let mut f = TestFunction::constant(dim, rng.gen_range(-scale..scale));
    for i in 0..dim {
        let mut e = vec![0; dim];
        e[i] = 1;
        f = f.with_monomial(e, rng.gen_range(-scale..scale));
        for j in i..dim {
            let mut e = vec![0; dim];
            e[i] += 1;
            e[j] += 1;
            f = f.with_monomial(e, rng.gen_range(-scale..scale));
        }
    }
    let center = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
    f.with_bump(center, rng.gen_range(0.5..1.5), rng.gen_range(-scale..scale))
}

/// Mild Hamiltonian for long flows: weak quadratic and linear parts plus a broad, shallow bump.
pub fn gentle_hamiltonian(seed: u64, dim: usize) -> TestFunction {
    let mut rng = rng(seed ^ 0x4a3_11e0);
    let mut f = TestFunction::constant(dim, 0.0);
    for i in 0..dim {
        let mut e = vec![0; dim];
        e[i] = 1;
        f = f.with_monomial(e, rng.gen_range(-0.3..0.3));
        for j in i..dim {
            let mut e = vec![0; dim];
            e[i] += 1;
            e[j] += 1;
            f = f.with_monomial(e, rng.gen_range(-0.25..0.25));
        }
    }
    let center = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    f.with_bump(center, rng.gen_range(1.5..3.0), rng.gen_range(-0.05..0.05))
}

/// Tangential speed field vanishing at the given mark slots:
/// `Z(θ) = q(θ) Π_m (1 - cos(θ - θ_m))` with a seeded low-order `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedRecipe {
    pub q: Fourier,
    pub slots: Vec<usize>,
}

impl SpeedRecipe {
    pub fn random(seed: u64, slots: &[usize]) -> Self {
        let mut rng = rng(seed ^ 0x2f1e_1d00);
        let mean = rng.gen_range(-1.0..1.0);
        Self { q: Fourier::random(&mut rng, mean, 2, 1.0), slots: slots.to_vec() }
    }

    /// Values at the `n` grid parameters; exactly zero at marked vertices.
    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        let marks = marks_at(n, &self.slots)?;
        let h = quadrature::spacing(n);
        Ok((0..n)
            .map(|i| {
                let t = i as f64 * h;
                marks.iter().fold(self.q.eval(t), |acc, &m| acc * (1.0 - (t - m as f64 * h).cos()))
            })
            .collect())
    }
}

/// Reparametrization `w(θ) = θ + scale·m(θ)·shape(θ)` of the circle, with
/// `m = Π (1 − cos(θ − θ_j)) / 2` over the marks, so every mark is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    pub shape: Fourier,
    pub slots: Vec<usize>,
    pub scale: f64,
}

impl Warp {
    /// Random gentle warp: `|w' - 1| ≤ 1/4`, `|w''| ≤ 1/2` and `|w'''| ≤ 2`
    /// (checked on a fine grid).
    pub fn random<R: Rng>(rng: &mut R, slots: &[usize]) -> Self {
        let mean = rng.gen_range(-1.0..1.0);
        let shape = Fourier::random(rng, mean, 3, 1.0);
        let unit = Self { shape, slots: slots.to_vec(), scale: 1.0 };
        let n = 4096;
        let h = TAU / n as f64;
        let d1: Vec<f64> = (0..n).map(|i| unit.derivative(i as f64 * h) - 1.0).collect();
        let diff = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * h)).collect() };
        let sup = |v: &[f64]| v.iter().fold(1e-12_f64, |m, x| m.max(x.abs()));
        let d2 = diff(&d1);
        let d3 = diff(&d2);
        let scale = (rng.gen_range(0.1..0.25) / sup(&d1)).min(0.5 / sup(&d2)).min(2.0 / sup(&d3));
        Self { scale, ..unit }
    }

    fn mark_angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.slots.iter().map(|&s| s as f64 * TAU / MARK_SLOTS as f64)
    }

    /// `(m, m')` of the mark factor.
    fn mark_factor(&self, t: f64) -> (f64, f64) {
        self.mark_angles().fold((1.0, 0.0), |(m, dm), a| {
            let f = 0.5 * (1.0 - (t - a).cos());
            let df = 0.5 * (t - a).sin();
            (m * f, dm * f + m * df)
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        t + self.scale * self.mark_factor(t).0 * self.shape.eval(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (m, dm) = self.mark_factor(t);
        1.0 + self.scale * (dm * self.shape.eval(t) + m * self.shape.derivative(t))
    }

    /// Solve `w(θ) = x` by safeguarded Newton iteration.
    pub fn inverse(&self, x: f64) -> f64 {
        let bound = self.scale * self.shape.coeffs.iter().map(|(a, b)| a.abs() + b.abs()).sum::<f64>();
        let (mut lo, mut hi) = (x - bound - 1e-12, x + bound + 1e-12);
        let mut t = x;
        for _ in 0..200 {
            let r = self.eval(t) - x;
            if r.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) || hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = t - r / self.derivative(t);
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        t
    }
}

/// Positive analytic density on the circle, optionally pushed forward by a
/// mark-fixing [`Warp`]. A pushforward keeps every arc mass exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRecipe {
    pub base: Fourier,
    pub slots: Vec<usize>,
    pub warp: Option<Warp>,
}

const REFERENCE_RESOLUTION: usize = 1 << 14;

impl DensityRecipe {
    pub fn random<R: Rng>(rng: &mut R, slots: &[usize], amp: f64) -> Self {
        let base = Fourier::random(rng, 1.0, 2, amp);
        Self { base, slots: slots.to_vec(), warp: None }
    }

    /// The density `ν` with `ν(w(θ)) w'(θ) = μ(θ)`.
    pub fn pushed(&self, warp: Warp) -> Self {
        Self { warp: Some(warp), ..self.clone() }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.warp {
            None => self.base.eval(t),
            Some(w) => {
                let s = w.inverse(t);
                self.base.eval(s) / w.derivative(s)
            }
        }
    }

    pub fn sample(&self, n: usize) -> Vec<f64> {
        let h = quadrature::spacing(n);
        (0..n).map(|i| self.eval(i as f64 * h)).collect()
    }

    /// Arc masses by composite Simpson at a fine reference resolution.
    pub fn reference_masses(&self) -> Vec<f64> {
        let n = REFERENCE_RESOLUTION;
        let h = quadrature::spacing(n);
        let v = self.sample(n);
        let marks = marks_at(n, &self.slots).expect("reference resolution is a multiple of the slot count");
        let bounds: Vec<(usize, usize)> = match marks.len() {
            0 => vec![(0, n)],
            k => (0..k).map(|j| (marks[j], if j + 1 < k { marks[j + 1] } else { marks[0] + n })).collect(),
        };
        bounds
            .into_iter()
            .map(|(a, b)| {
                let inner: f64 = (a + 1..b).map(|i| if (i - a) % 2 == 1 { 4.0 } else { 2.0 } * v[i % n]).sum();
                h / 3.0 * (v[a % n] + inner + v[b % n])
            })
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.sample(4096).into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Pair of positive densities with identical arc masses (`equal`: the second
/// is a random mark-fixing pushforward of the first) or with at least one
/// arc differing by 1% or more (a low-order perturbation of the first).
pub fn density_pair(seed: u64, slots: &[usize], equal: bool) -> (DensityRecipe, DensityRecipe) {
    let mut rng = rng(seed ^ 0xd3_5e77);
    loop {
        let mu = DensityRecipe::random(&mut rng, slots, 0.2);
        if equal {
            let nu = mu.pushed(Warp::random(&mut rng, slots));
            if nu.min_value() > 0.1 {
                return (mu, nu);
            }
            continue;
        }
        // a mean shift makes single-arc pairs unequal too
        let shift = rng.gen_range(0.02..0.15) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let delta = Fourier::random(&mut rng, shift, 2, 0.2);
        let mut nu = mu.clone();
        for (c, d) in nu.base.coeffs.iter_mut().zip(&delta.coeffs) {
            c.0 += d.0;
            c.1 += d.1;
        }
        let target = mu.reference_masses();
        let mismatch =
            nu.reference_masses().iter().zip(&target).map(|(h, t)| ((h - t) / t).abs()).fold(0.0, f64::max);
        if mismatch > 0.01 && nu.min_value() > 0.1 {
            return (mu, nu);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_are_deterministic() {
        assert_eq!(LoopRecipe::random(3, 2, 3), LoopRecipe::random(3, 2, 3));
        assert_ne!(LoopRecipe::random(3, 2, 3), LoopRecipe::random(4, 2, 3));
        assert_eq!(gentle_hamiltonian(9, 2), gentle_hamiltonian(9, 2));
    }

    #[test]
    fn loop_flags_refine_consistently() {
        let r = LoopRecipe::random(1, 2, 3);
        let a = r.flag(256).unwrap();
        let b = r.flag(512).unwrap();
        for (ma, mb) in a.curve().unwrap().marked().iter().zip(b.curve().unwrap().marked()) {
            assert_eq!(2 * ma, *mb);
            assert_eq!(a.curve().unwrap().vertex(*ma), b.curve().unwrap().vertex(*mb));
        }
        assert_eq!(a.point_set().unwrap().len(), 3);
    }

    #[test]
    fn speeds_vanish_at_marks() {
        let z = SpeedRecipe::random(5, &[0, 5, 11]).sample(64).unwrap();
        for m in [0, 20, 44] {
            assert_eq!(z[m], 0.0);
        }
        assert!(z.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn warps_fix_marks_and_invert() {
        let w = Warp::random(&mut rng(4), &[0, 3, 10]);
        for s in [0usize, 3, 10] {
            let a = s as f64 * TAU / MARK_SLOTS as f64;
            assert!((w.eval(a) - a).abs() < 1e-15);
        }
        for i in 0..50 {
            let x = i as f64 * 0.13;
            assert!((w.eval(w.inverse(x)) - x).abs() < 1e-13);
            let d = w.derivative(x);
            assert!((0.74..=1.26).contains(&d), "{d}");
        }
    }

    #[test]
    fn equal_pairs_share_arc_masses() {
        let (mu, nu) = density_pair(2, &[0, 4, 9], true);
        for (a, b) in mu.reference_masses().iter().zip(nu.reference_masses()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let (mu, nu) = density_pair(2, &[0, 4, 9], false);
        let d = mu.reference_masses().iter().zip(nu.reference_masses()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d > 1e-3);
    }
}
