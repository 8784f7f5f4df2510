//! Isodrastic tangents and the leafwise symplectic form on pointed loops.
//!
//! A tangent to a flag `(points ⊂ loop)` is a velocity `u` per loop vertex
//! (points ride on their marked vertices) together with a density potential
//! `λ` per vertex: the density moves by `dλ`. On the loop the form reads
//!
//! ```text
//! Ω((u, dλ), (v, dγ)) = Σ_p Γ_p ω(u_p, v_p)
//!                     + ∫ ω(u, v) α  -  ∫ φ* i_u ω · γ  +  ∫ φ* i_v ω · λ
//! ```
//!
//! The first loop integral is a vertex trapezoid; the 1-form pullbacks
//! `φ* i_u ω` are evaluated edge-wise as `ω(ū_e, φ_{i+1} - φ_i)` against the
//! edge-averaged potential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FlagError, Result};
use crate::flag::{DiscreteLoop, WeightedFlag};
use crate::moment;
use crate::quadrature;
use crate::symplectic::{omega, TestFunction};

/// Velocity field and density potential on the loop of a flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagTangent {
    dim: usize,
    u: Vec<f64>,
    lambda: Vec<f64>,
}

fn curve_of(flag: &WeightedFlag) -> Result<&DiscreteLoop> {
    flag.curve()
        .ok_or_else(|| FlagError::Unsupported("isodrastic tangents need a loop level".into()))
}

impl FlagTangent {
    /// A tangent respecting the constraint `λ = 0` at every marked vertex.
    pub fn new(flag: &WeightedFlag, u: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let tan = Self::unconstrained(flag.dim(), u, lambda);
        tan.check_compatible(flag)?;
        for &m in curve_of(flag)?.marked() {
            if tan.lambda[m] != 0.0 {
                return Err(FlagError::ConstraintViolation { index: m, value: tan.lambda[m] });
            }
        }
        Ok(tan)
    }

    /// Raw tangent data without the marked-vertex constraint (for controls).
    pub fn unconstrained(dim: usize, u: Vec<f64>, lambda: Vec<f64>) -> Self {
        Self { dim, u, lambda }
    }

    pub fn zero(flag: &WeightedFlag) -> Result<Self> {
        let n = curve_of(flag)?.len();
        Ok(Self { dim: flag.dim(), u: vec![0.0; n * flag.dim()], lambda: vec![0.0; n] })
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.u
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn check_compatible(&self, flag: &WeightedFlag) -> Result<()> {
        let curve = curve_of(flag).map_err(|e| FlagError::IncompatibleTangent(e.to_string()))?;
        let n = curve.len();
        if self.dim != flag.dim() || self.u.len() != n * self.dim || self.lambda.len() != n {
            return Err(FlagError::IncompatibleTangent(format!(
                "tangent has {} velocity values and {} potentials for a loop of {n} vertices in R^{}",
                self.u.len(),
                self.lambda.len(),
                flag.dim()
            )));
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            dim: self.dim,
            u: self.u.iter().zip(&other.u).map(|(x, y)| a * x + b * y).collect(),
            lambda: self.lambda.iter().zip(&other.lambda).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// Discrete L² norm `sqrt(Δθ Σ (|u_i|² + λ_i²))`.
    pub fn l2_norm(&self) -> f64 {
        let n = self.lambda.len();
        let s: f64 = self.u.iter().map(|x| x * x).sum::<f64>() + self.lambda.iter().map(|x| x * x).sum::<f64>();
        (quadrature::spacing(n) * s).sqrt()
    }

    /// Flag moved by `h` along this tangent: vertices and their points by
    /// `h·u`, loop density by `h·dλ`. No revalidation.
    pub fn displace(&self, flag: &WeightedFlag, h: f64) -> WeightedFlag {
        let mut out = flag.clone();
        let anchors = flag.anchors().to_vec();
        let dim = self.dim;
        if let Some(points) = out.point_set_mut() {
            for (p, &a) in anchors.iter().enumerate() {
                for k in 0..dim {
                    points.coords_mut()[p * dim + k] += h * self.u[a * dim + k];
                }
            }
        }
        if let Some(curve) = out.curve_mut() {
            let dl = quadrature::centered_derivative(&self.lambda, curve.spacing());
            for (c, du) in curve.coords_mut().iter_mut().zip(&self.u) {
                *c += h * du;
            }
            for (d, g) in curve.density_mut().iter_mut().zip(dl) {
                *d += h * g;
            }
        }
        out
    }
}

/// Infinitesimal reparametrization `ζ_Z`: `u = Z φ'`, `λ = Z α`.
pub fn generator(flag: &WeightedFlag, z: &[f64]) -> Result<FlagTangent> {
    let curve = curve_of(flag)?;
    let n = curve.len();
    if z.len() != n {
        return Err(FlagError::LengthMismatch { left: n, right: z.len() });
    }
    for &m in curve.marked() {
        if z[m] != 0.0 {
            return Err(FlagError::ConstraintViolation { index: m, value: z[m] });
        }
    }
    reparametrization_tangent(flag, z)
}

/// `(Z φ', Z α)` for any speed field, without the marked-vertex constraint.
/// With `Z ≠ 0` at a mark this is not a generator and pairs nontrivially.
pub fn reparametrization_tangent(flag: &WeightedFlag, z: &[f64]) -> Result<FlagTangent> {
    let curve = curve_of(flag)?;
    let n = curve.len();
    if z.len() != n {
        return Err(FlagError::LengthMismatch { left: n, right: z.len() });
    }
    let mut u = Vec::with_capacity(n * flag.dim());
    for (i, zi) in z.iter().enumerate() {
        u.extend(curve.tangent(i).into_iter().map(|t| zi * t));
    }
    let lambda = z.iter().zip(curve.density()).map(|(zi, d)| zi * d).collect();
    Ok(FlagTangent { dim: flag.dim(), u, lambda })
}

/// Tangent of the Hamiltonian action: `u = X_f ∘ φ`, densities untouched.
pub fn ham_generator(flag: &WeightedFlag, f: &TestFunction) -> Result<FlagTangent> {
    f.check_dim(flag.dim())?;
    let curve = curve_of(flag)?;
    let dim = flag.dim();
    let mut u = vec![0.0; curve.len() * dim];
    for (i, out) in u.chunks_mut(dim).enumerate() {
        f.hamiltonian_field_into(curve.vertex(i), out);
    }
    Ok(FlagTangent { dim, u, lambda: vec![0.0; curve.len()] })
}

/// Edge-wise `ω(ū_e, e)` for every edge: the pulled-back 1-form `φ* i_u ω`.
fn pulled_back_form(curve: &DiscreteLoop, tan: &FlagTangent) -> Vec<f64> {
    let n = curve.len();
    let dim = curve.dim();
    let mut mid = vec![0.0; dim];
    let mut edge = vec![0.0; dim];
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let (a, b) = (curve.vertex(i), curve.vertex(j));
            for k in 0..dim {
                mid[k] = 0.5 * (tan.u[i * dim + k] + tan.u[j * dim + k]);
                edge[k] = b[k] - a[k];
            }
            omega(&mid, &edge)
        })
        .collect()
}

/// `∮ φ* i_u ω`; zero (up to quadrature) for tangents in the isodrastic
/// distribution, where the pulled-back form is exact.
pub fn isodrast_defect(flag: &WeightedFlag, tan: &FlagTangent) -> Result<f64> {
    tan.check_compatible(flag)?;
    Ok(pulled_back_form(curve_of(flag)?, tan).iter().sum())
}

/// The leafwise 2-form `Ω(t1, t2)` on a pointed loop.
pub fn omega_leafwise(flag: &WeightedFlag, t1: &FlagTangent, t2: &FlagTangent) -> Result<f64> {
    t1.check_compatible(flag)?;
    t2.check_compatible(flag)?;
    let curve = curve_of(flag)?;
    let n = curve.len();
    let mut points_term = 0.0;
    if let Some(points) = flag.point_set() {
        for (p, &a) in flag.anchors().iter().enumerate() {
            points_term += points.weights()[p] * omega(t1.velocity(a), t2.velocity(a));
        }
    }
    let mut area_term = 0.0;
    for i in 0..n {
        area_term += omega(t1.velocity(i), t2.velocity(i)) * curve.density()[i];
    }
    area_term *= curve.spacing();
    let f1 = pulled_back_form(curve, t1);
    let f2 = pulled_back_form(curve, t2);
    let mut form_terms = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let gamma_e = 0.5 * (t2.lambda[i] + t2.lambda[j]);
        let lambda_e = 0.5 * (t1.lambda[i] + t1.lambda[j]);
        form_terms += f2[i] * lambda_e - f1[i] * gamma_e;
    }
    Ok(points_term + area_term + form_terms)
}

/// Relative defect of `d⟨J, f⟩(tan) = Ω(ζ_f, tan)`.
pub fn moment_identity_residual(flag: &WeightedFlag, f: &TestFunction, tan: &FlagTangent, h: f64) -> Result<f64> {
    let lhs = moment::pair_directional(flag, tan, f, h)?;
    let rhs = omega_leafwise(flag, &ham_generator(flag, f)?, tan)?;
    Ok((lhs - rhs).abs() / (1.0 + rhs.abs()))
}

/// Largest normalized pairing `|Ω(tan, w)| / (‖tan‖ ‖w‖)` over seeded random tangents `w`.
pub fn pairing_residual(flag: &WeightedFlag, tan: &FlagTangent, trials: usize, seed: u64) -> Result<f64> {
    tan.check_compatible(flag)?;
    let norm = tan.l2_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for k in 0..trials as u64 {
        let w = random_tangent(flag, seed.wrapping_add(k))?;
        let r = omega_leafwise(flag, tan, &w)?.abs() / (norm * w.l2_norm());
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Kernel check: generators of reparametrizations pair to zero with everything.
pub fn kernel_residual(flag: &WeightedFlag, z: &[f64], trials: usize, seed: u64) -> Result<f64> {
    pairing_residual(flag, &generator(flag, z)?, trials, seed)
}

const FOURIER_MODES: usize = 3;

fn fourier(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    (0..=FOURIER_MODES)
        .map(|k| {
            let s = 1.0 / (1.0 + k as f64);
            (s * rng.gen_range(-1.0..1.0), s * rng.gen_range(-1.0..1.0))
        })
        .collect()
}

fn eval_fourier(c: &[(f64, f64)], t: f64) -> f64 {
    c.iter().enumerate().map(|(k, (a, b))| a * (k as f64 * t).cos() + b * (k as f64 * t).sin()).sum()
}

/// Deterministic smooth random tangent in the discrete isodrastic distribution.
///
/// `u` and `λ` are low-order Fourier series in the loop parameter, `λ` is
/// corrected arc-by-arc (linearly) to vanish at marked vertices, a seeded
/// Hamiltonian tangent is added to `u`, and finally a multiple of the unit
/// flux field `N` (with `ω(N, φ') = 1`) is removed so that `∮ φ* i_u ω = 0`.
pub fn random_tangent(flag: &WeightedFlag, seed: u64) -> Result<FlagTangent> {
    let curve = curve_of(flag)?;
    let n = curve.len();
    let dim = flag.dim();
    let h = curve.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a46_e47f_1a95);

    let u_coeffs: Vec<_> = (0..dim).map(|_| fourier(&mut rng)).collect();
    let l_coeffs = fourier(&mut rng);
    let mut u = Vec::with_capacity(n * dim);
    for i in 0..n {
        let t = i as f64 * h;
        u.extend(u_coeffs.iter().map(|c| eval_fourier(c, t)));
    }
    let raw: Vec<f64> = (0..n).map(|i| eval_fourier(&l_coeffs, i as f64 * h)).collect();
    let mut lambda = raw.clone();
    if !curve.marked().is_empty() {
        for (a, b) in quadrature::arcs(n, curve.marked()) {
            let (la, lb) = (raw[a % n], raw[b % n]);
            for i in a..=b {
                let s = (i - a) as f64 / (b - a) as f64;
                lambda[i % n] = raw[i % n] - (la + s * (lb - la));
            }
        }
        for &m in curve.marked() {
            lambda[m] = 0.0;
        }
    }

    let g = crate::random::random_test_function(&mut rng, dim, 0.5);
    let mut xg = vec![0.0; dim];
    for i in 0..n {
        g.hamiltonian_field_into(curve.vertex(i), &mut xg);
        for k in 0..dim {
            u[i * dim + k] += xg[k];
        }
    }

    let mut tan = FlagTangent { dim, u, lambda };
    let flux_field = unit_flux_field(curve);
    let defect: f64 = pulled_back_form(curve, &tan).iter().sum();
    let unit: f64 = pulled_back_form(curve, &flux_field).iter().sum();
    if unit.abs() > 0.0 {
        tan = tan.combine(1.0, &flux_field, -defect / unit);
    }
    Ok(tan)
}

/// `N_i = J φ'_i / |φ'_i|²`, so that `ω(N_i, φ'_i) = 1` at every vertex.
fn unit_flux_field(curve: &DiscreteLoop) -> FlagTangent {
    let n = curve.len();
    let dim = curve.dim();
    let mut u = Vec::with_capacity(n * dim);
    for i in 0..n {
        let t = curve.tangent(i);
        let norm2: f64 = t.iter().map(|x| x * x).sum();
        for k in (0..dim).step_by(2) {
            u.push(t[k + 1] / norm2);
            u.push(-t[k] / norm2);
        }
    }
    FlagTangent { dim, u, lambda: vec![0.0; n] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::WeightedPointSet;
    use std::f64::consts::TAU;

    fn unit_circle(n: usize, marks: &[usize]) -> WeightedFlag {
        let curve = DiscreteLoop::circle(2, n, 1.0, |_| 1.0, vec![]).unwrap();
        let pos: Vec<Vec<f64>> = marks.iter().map(|&m| curve.vertex(m).to_vec()).collect();
        let w = (0..marks.len()).map(|k| 1.0 + k as f64).collect();
        let pts = WeightedPointSet::new(2, &pos, w).unwrap();
        WeightedFlag::points_in_loop(pts, curve, 1e-12).unwrap()
    }

    fn radial(flag: &WeightedFlag) -> Vec<f64> {
        flag.curve().unwrap().coords().to_vec()
    }

    #[test]
    fn zero_generator() {
        let flag = unit_circle(64, &[0]);
        let t = generator(&flag, &vec![0.0; 64]).unwrap();
        assert_eq!(t, FlagTangent::zero(&flag).unwrap());
    }

    #[test]
    fn generator_potential_is_speed_times_density() {
        let flag = unit_circle(64, &[0]);
        let h = TAU / 64.0;
        let z: Vec<f64> = (0..64).map(|i| (i as f64 * h).sin()).collect();
        let t = generator(&flag, &z).unwrap();
        assert_eq!(t.lambda(), z.as_slice());
    }

    #[test]
    fn generator_rejects_motion_at_marks() {
        let flag = unit_circle(64, &[0, 10]);
        let z = vec![0.5; 64];
        assert!(matches!(generator(&flag, &z), Err(FlagError::ConstraintViolation { index: 0, .. })));
    }

    #[test]
    fn rotation_generator_on_circle() {
        let flag = unit_circle(64, &[0]);
        let t = ham_generator(&flag, &TestFunction::rotation(2)).unwrap();
        let c = flag.curve().unwrap();
        for i in 0..64 {
            let p = c.vertex(i);
            let v = t.velocity(i);
            assert!((v[0] - p[1]).abs() < 1e-15 && (v[1] + p[0]).abs() < 1e-15);
        }
        assert!(t.lambda().iter().all(|l| *l == 0.0));
        assert!(ham_generator(&flag, &TestFunction::constant(2, 3.0)).unwrap().l2_norm() == 0.0);
    }

    #[test]
    fn form_is_alternating() {
        let flag = unit_circle(128, &[0, 40, 90]);
        let a = random_tangent(&flag, 3).unwrap();
        let b = random_tangent(&flag, 4).unwrap();
        assert_eq!(omega_leafwise(&flag, &a, &a).unwrap(), 0.0);
        assert_eq!(omega_leafwise(&flag, &a, &b).unwrap(), -omega_leafwise(&flag, &b, &a).unwrap());
    }

    #[test]
    fn velocity_against_potential() {
        let flag = unit_circle(64, &[0]);
        let n = 64;
        let h = TAU / n as f64;
        let u = radial(&flag);
        let gamma: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin().powi(2)).collect();
        let t1 = FlagTangent::new(&flag, u, vec![0.0; n]).unwrap();
        let t2 = FlagTangent::new(&flag, vec![0.0; 2 * n], gamma.clone()).unwrap();
        let c = flag.curve().unwrap();
        let expected: f64 = -(0..n)
            .map(|i| {
                let j = (i + 1) % n;
                let mid = [0.5 * (t1.velocity(i)[0] + t1.velocity(j)[0]), 0.5 * (t1.velocity(i)[1] + t1.velocity(j)[1])];
                let e = c.edge(i);
                (mid[0] * e[1] - mid[1] * e[0]) * 0.5 * (gamma[i] + gamma[j])
            })
            .sum::<f64>();
        let got = omega_leafwise(&flag, &t1, &t2).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        assert!(got.abs() > 0.1);
    }

    #[test]
    fn radial_and_rotated_radial() {
        let flag = WeightedFlag::single_loop(DiscreteLoop::circle(2, 256, 1.0, |_| 1.0, vec![]).unwrap());
        let n = 256;
        let u = radial(&flag);
        let v: Vec<f64> = u.chunks(2).flat_map(|p| [-p[1], p[0]]).collect();
        let tu = FlagTangent::new(&flag, u.clone(), vec![0.0; n]).unwrap();
        let tu2 = FlagTangent::new(&flag, u, vec![0.0; n]).unwrap();
        let tv = FlagTangent::new(&flag, v, vec![0.0; n]).unwrap();
        assert!(omega_leafwise(&flag, &tu, &tu2).unwrap().abs() < 1e-12);
        assert!((omega_leafwise(&flag, &tu, &tv).unwrap() - TAU).abs() < 1e-6);
    }

    #[test]
    fn random_tangent_is_deterministic_and_constrained() {
        let flag = unit_circle(128, &[0, 40, 90]);
        let a = random_tangent(&flag, 11).unwrap();
        let b = random_tangent(&flag, 11).unwrap();
        assert_eq!(a, b);
        for &m in flag.curve().unwrap().marked() {
            assert_eq!(a.lambda()[m], 0.0);
        }
        assert!(isodrast_defect(&flag, &a).unwrap().abs() < 1e-12);
        assert_ne!(a, random_tangent(&flag, 12).unwrap());
    }

    #[test]
    fn moment_identity_trivial_cases() {
        let flag = unit_circle(128, &[0, 40, 90]);
        let f = crate::random::random_test_function(&mut ChaCha8Rng::seed_from_u64(1), 2, 1.0);
        let zero = FlagTangent::zero(&flag).unwrap();
        assert_eq!(moment_identity_residual(&flag, &f, &zero, 1e-5).unwrap(), 0.0);
        let tan = random_tangent(&flag, 5).unwrap();
        let c = TestFunction::constant(2, 2.0);
        assert!(moment_identity_residual(&flag, &c, &tan, 1e-5).unwrap() < 1e-9);
    }

    #[test]
    fn incompatible_tangent_is_rejected() {
        let a = unit_circle(64, &[0]);
        let b = unit_circle(128, &[0]);
        let t = random_tangent(&b, 0).unwrap();
        assert!(matches!(omega_leafwise(&a, &t, &t), Err(FlagError::IncompatibleTangent(_))));
    }
}
