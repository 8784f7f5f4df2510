//! The moment map `⟨J(flag), f⟩ = Σ_i ∫_{N_i} f ν_i` and the bump-function
//! separation of distinct flags.

use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::flag::{FlagLevels, WeightedFlag};
use crate::isodrast::FlagTangent;
use crate::quadrature;
use crate::symplectic::TestFunction;

/// Pair a flag with an arbitrary scalar function.
///
/// Points contribute `weight · f(x)`, loops the periodic trapezoid of
/// `f(φ) · density`, and tori the 2-D periodic trapezoid.
pub fn pair_fn(flag: &WeightedFlag, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut acc = 0.0;
    if let Some(points) = flag.point_set() {
        for (p, w) in points.weights().iter().enumerate() {
            acc += w * f(points.position(p));
        }
    }
    match flag.levels() {
        FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => {
            let mut s = 0.0;
            for (i, d) in c.density().iter().enumerate() {
                s += f(c.vertex(i)) * d;
            }
            acc += c.spacing() * s;
        }
        FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => {
            if let FlagLevels::MeridiansInTorus { meridian_density, .. } = flag.levels() {
                let hb = quadrature::spacing(t.rows());
                for (&j, dens) in t.marked_columns().iter().zip(meridian_density) {
                    let mut s = 0.0;
                    for (i, d) in dens.iter().enumerate() {
                        s += f(t.point(i, j)) * d;
                    }
                    acc += hb * s;
                }
            }
            let mut s = 0.0;
            for i in 0..t.rows() {
                for j in 0..t.cols() {
                    s += f(t.point(i, j)) * t.density()[i * t.cols() + j];
                }
            }
            acc += t.cell_measure() * s;
        }
        FlagLevels::Points(_) => {}
    }
    acc
}

/// `⟨J(flag), f⟩`.
pub fn pair(flag: &WeightedFlag, f: &TestFunction) -> Result<f64> {
    f.check_dim(flag.dim())?;
    Ok(pair_fn(flag, |x| f.eval(x)))
}

/// Central difference of the pairing along a flag tangent.
///
/// The perturbed flags move vertices (and the points riding on them) by
/// `±h·u` and add `±h·dλ` to the loop density, with `dλ` the centered
/// difference of the potential.
pub fn pair_directional(flag: &WeightedFlag, tan: &FlagTangent, f: &TestFunction, h: f64) -> Result<f64> {
    f.check_dim(flag.dim())?;
    if !(h > 0.0) {
        return Err(FlagError::InvalidInput(format!("step h = {h} must be positive")));
    }
    tan.check_compatible(flag)?;
    let plus = tan.displace(flag, h);
    let minus = tan.displace(flag, -h);
    Ok((pair_fn(&plus, |x| f.eval(x)) - pair_fn(&minus, |x| f.eval(x))) / (2.0 * h))
}

/// Pairing gaps below this are treated as indistinguishable.
pub const INDISTINGUISHABLE: f64 = 1e-12;

/// A separating bump function and the pairing gap it achieves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub center: Vec<f64>,
    pub width: f64,
    pub amp: f64,
    pub gap: f64,
}

impl Separation {
    pub fn test_function(&self) -> TestFunction {
        TestFunction::default().with_bump(self.center.clone(), self.width, self.amp)
    }
}

fn sample_points(flag: &WeightedFlag) -> Vec<Vec<f64>> {
    flag.positions().chunks(flag.dim()).map(<[f64]>::to_vec).collect()
}

fn extent(points: &[Vec<f64>]) -> (f64, f64) {
    let mut diam = 0.0_f64;
    let mut min_sep = f64::INFINITY;
    for w in points.windows(2) {
        let d = crate::flag::dist(&w[0], &w[1]);
        if d > 0.0 {
            min_sep = min_sep.min(d);
        }
    }
    let dim = points.first().map_or(0, Vec::len);
    for k in 0..dim {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
        diam = diam.max(hi - lo);
    }
    (diam.max(1e-6), min_sep.min(diam).max(1e-9))
}

/// Search for a unit-amplitude Gaussian bump that tells two flags apart.
///
/// Candidates are centered at the sample points of both flags, with widths
/// decreasing geometrically from the joint diameter down to the finest
/// sample spacing; at most `budget` candidates are evaluated. Returns the
/// candidate with the largest gap (first in scan order on ties), or `None`
/// when every gap is below [`INDISTINGUISHABLE`].
pub fn separate(a: &WeightedFlag, b: &WeightedFlag, budget: usize) -> Result<Option<Separation>> {
    if a.dim() != b.dim() {
        return Err(FlagError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let mut centers = sample_points(a);
    centers.extend(sample_points(b));
    let (diam, finest) = extent(&centers);
    let mut widths = vec![diam];
    while *widths.last().unwrap() > finest && widths.len() < 40 {
        let w = widths.last().unwrap() / 4.0;
        widths.push(w);
    }
    if budget == 0 || centers.is_empty() {
        return Ok(None);
    }
    let per_width = (budget / widths.len()).max(1);
    let stride = centers.len().div_ceil(per_width).max(1);

    let mut best: Option<Separation> = None;
    let mut used = 0;
    'scan: for &w in &widths {
        for c in centers.iter().step_by(stride) {
            if used == budget {
                break 'scan;
            }
            used += 1;
            let bump = TestFunction::default().with_bump(c.clone(), w, 1.0);
            let gap = (pair_fn(a, |x| bump.eval(x)) - pair_fn(b, |x| bump.eval(x))).abs();
            if best.as_ref().is_none_or(|s| gap > s.gap) {
                best = Some(Separation { center: c.clone(), width: w, amp: 1.0, gap });
            }
        }
    }
    Ok(best.filter(|s| s.gap >= INDISTINGUISHABLE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::{DiscreteLoop, WeightedPointSet};
    use std::f64::consts::{PI, TAU};

    fn symmetric_flag() -> WeightedFlag {
        let curve = DiscreteLoop::circle(2, 64, 1.0, |_| 1.0, vec![]).unwrap();
        let pos = vec![curve.vertex(0).to_vec(), curve.vertex(32).to_vec()];
        let pts = WeightedPointSet::new(2, &pos, vec![2.0, 2.0]).unwrap();
        WeightedFlag::points_in_loop(pts, curve, 1e-12).unwrap()
    }

    #[test]
    fn unit_function_gives_total_mass() {
        let flag = symmetric_flag();
        let v = pair(&flag, &TestFunction::constant(2, 1.0)).unwrap();
        assert!((v - (4.0 + TAU)).abs() < 1e-12);
    }

    #[test]
    fn odd_function_on_symmetric_flag_vanishes() {
        let v = pair(&symmetric_flag(), &TestFunction::coordinate(2, 0)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn x_squared_on_circle() {
        // ∮ cos²θ dθ = π
        let flag = WeightedFlag::single_loop(DiscreteLoop::circle(2, 256, 1.0, |_| 1.0, vec![]).unwrap());
        let f = TestFunction::default().with_monomial(vec![2, 0], 1.0);
        assert!((pair(&flag, &f).unwrap() - PI).abs() < 1e-6);
    }

    #[test]
    fn distant_bump_decays() {
        let f = TestFunction::default().with_bump(vec![100.0, 0.0], 1.0, 1.0);
        assert!(pair(&symmetric_flag(), &f).unwrap().abs() < 1e-30);
    }

    #[test]
    fn dimension_mismatch() {
        let f = TestFunction::constant(4, 1.0);
        assert!(matches!(pair(&symmetric_flag(), &f), Err(FlagError::DimensionMismatch { .. })));
    }

    #[test]
    fn identical_flags_are_inseparable() {
        let a = symmetric_flag();
        assert_eq!(separate(&a, &a.clone(), 1000).unwrap(), None);
    }

    #[test]
    fn weight_difference_is_found() {
        let a = WeightedFlag::points(WeightedPointSet::new(2, &[vec![0.0, 0.0], vec![3.0, 0.0]], vec![1.0, 1.0]).unwrap());
        let b = WeightedFlag::points(WeightedPointSet::new(2, &[vec![0.0, 0.0], vec![3.0, 0.0]], vec![2.0, 1.0]).unwrap());
        let s = separate(&a, &b, 1000).unwrap().unwrap();
        assert!((s.gap - 1.0).abs() < 1e-6, "{s:?}");
        let f = s.test_function();
        let recomputed = (pair(&a, &f).unwrap() - pair(&b, &f).unwrap()).abs();
        assert!((recomputed - s.gap).abs() < 1e-12);
    }
}
