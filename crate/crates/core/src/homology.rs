//! Classification of mass signatures up to relabelling symmetries.
//!
//! Pointed loops carry `(Γ, w)`: point weights on the vertices of a `k`-gon
//! and arc masses on its edges, acted on by the dihedral group. Nested
//! spheres carry hemisphere pairs `(a⁺, a⁻)` per level, each of which may be
//! swapped. Pairs of rational action integrals on a torus are classified up
//! to `SL(2, Z)` by the generator of the subgroup they span in `Q`.

use std::cmp::Ordering;
use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{FlagError, Result};
use crate::flag::MassSignature;

/// Absolute tolerance for comparing canonical floating-point signatures.
pub const SIGNATURE_TOL: f64 = 1e-12;

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryGroup {
    Trivial,
    /// Dihedral group of the `k`-gon; `k` is read off the signature.
    Dihedral,
    /// Independent swaps of each level's hemisphere pair.
    Hyperoct,
    /// `SL(2, Z)` on a pair of exact rationals.
    Sl2z,
}

impl FromStr for SymmetryGroup {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trivial" => Ok(Self::Trivial),
            "dihedral" => Ok(Self::Dihedral),
            "hyperoct" | "hyperoctahedral" => Ok(Self::Hyperoct),
            "sl2z" => Ok(Self::Sl2z),
            other => Err(FlagError::InvalidInput(format!("unknown group {other:?}"))),
        }
    }
}

impl fmt::Display for SymmetryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Trivial => "trivial",
            Self::Dihedral => "dihedral",
            Self::Hyperoct => "hyperoct",
            Self::Sl2z => "sl2z",
        })
    }
}

// ---------------------------------------------------------------------------
// Dihedral

/// Index maps of the `2k` dihedral elements: `(vertex map, edge map)`.
///
/// Rotation by `r` sends vertex `i` to `i + r`. The reflection sends vertex
/// `i` to `-i` and hence edge `[i, i+1]` to edge `[-i-1, -i]`, i.e. edge
/// index `-i-1`.
fn dihedral_elements(k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::with_capacity(2 * k);
    for reflect in [false, true] {
        for r in 0..k {
            let vertex = (0..k).map(|i| if reflect { (2 * k - i + r) % k } else { (i + r) % k }).collect();
            let edge = (0..k).map(|i| if reflect { (2 * k - i - 1 + r) % k } else { (i + r) % k }).collect();
            out.push((vertex, edge));
        }
    }
    out
}

/// All `2k` images of `(Γ, w)`, rotations first, then reflections.
pub fn dihedral_images<T: Clone>(gammas: &[T], ws: &[T]) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    if gammas.len() != ws.len() {
        return Err(FlagError::LengthMismatch { left: gammas.len(), right: ws.len() });
    }
    if gammas.is_empty() {
        return Err(FlagError::ShapeMismatch("dihedral signatures need k ≥ 1".into()));
    }
    Ok(dihedral_elements(gammas.len())
        .into_iter()
        .map(|(vm, em)| (vm.iter().map(|&i| gammas[i].clone()).collect(), em.iter().map(|&i| ws[i].clone()).collect()))
        .collect())
}

fn lex_cmp<T>(a: &(Vec<T>, Vec<T>), b: &(Vec<T>, Vec<T>), cmp: impl Fn(&T, &T) -> Ordering) -> Ordering {
    a.0.iter().chain(&a.1).zip(b.0.iter().chain(&b.1)).map(|(x, y)| cmp(x, y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

fn canonicalize_with<T: Clone>(
    images: Vec<(Vec<T>, Vec<T>)>,
    cmp: impl Fn(&T, &T) -> Ordering,
    eq: impl Fn(&T, &T) -> bool,
) -> ((Vec<T>, Vec<T>), usize) {
    let original = images[0].clone();
    let stabilizer = images
        .iter()
        .filter(|img| img.0.iter().zip(&original.0).chain(img.1.iter().zip(&original.1)).all(|(a, b)| eq(a, b)))
        .count();
    let order = images.len();
    let canonical = images.into_iter().min_by(|a, b| lex_cmp(a, b, &cmp)).expect("at least one image");
    (canonical, order / stabilizer)
}

fn float_eq(a: &f64, b: &f64) -> bool {
    (a - b).abs() <= SIGNATURE_TOL
}

/// Lexicographically least dihedral image and the orbit size `2k / |stabilizer|`.
pub fn dihedral_canonicalize(gammas: &[f64], ws: &[f64]) -> Result<((Vec<f64>, Vec<f64>), usize)> {
    Ok(canonicalize_with(dihedral_images(gammas, ws)?, f64::total_cmp, float_eq))
}

/// Number of distinct images under explicit enumeration (orbit size without the stabilizer formula).
pub fn dihedral_orbit_by_enumeration(gammas: &[f64], ws: &[f64]) -> Result<usize> {
    let images = dihedral_images(gammas, ws)?;
    let mut distinct: Vec<&(Vec<f64>, Vec<f64>)> = Vec::new();
    for img in &images {
        let seen = distinct
            .iter()
            .any(|d| d.0.iter().zip(&img.0).chain(d.1.iter().zip(&img.1)).all(|(a, b)| float_eq(a, b)));
        if !seen {
            distinct.push(img);
        }
    }
    Ok(distinct.len())
}

// ---------------------------------------------------------------------------
// Hyperoctahedral

/// Sort every hemisphere pair; the orbit has `2^s` elements with `s` the
/// number of asymmetric pairs.
pub fn hyperoct_canonicalize(pairs: &[(f64, f64)]) -> (Vec<(f64, f64)>, u64) {
    let canonical = pairs.iter().map(|&(a, b)| if b < a { (b, a) } else { (a, b) }).collect();
    let s = pairs.iter().filter(|(a, b)| !float_eq(a, b)).count();
    (canonical, 1u64 << s.min(63))
}

/// Every image of the pairs under the `2^r` independent swaps.
pub fn hyperoct_images(pairs: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let r = pairs.len();
    assert!(r < 24, "too many levels to enumerate");
    (0..1u32 << r)
        .map(|mask| {
            pairs.iter().enumerate().map(|(i, &(a, b))| if mask >> i & 1 == 1 { (b, a) } else { (a, b) }).collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// SL(2, Z)

/// Two exact rationals, not both zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalPair(pub Rational, pub Rational);

impl RationalPair {
    pub fn new(a: Rational, b: Rational) -> Result<Self> {
        if a == Rational::from_integer(0) && b == Rational::from_integer(0) {
            return Err(FlagError::ZeroPair);
        }
        Ok(Self(a, b))
    }

    pub fn from_integers(a: i128, b: i128) -> Result<Self> {
        Self::new(Rational::from_integer(a), Rational::from_integer(b))
    }

    /// `M · (a, b)ᵀ`.
    pub fn apply(&self, m: &Sl2Matrix) -> Self {
        let [[p, q], [r, s]] = m.0.map(|row| row.map(Rational::from_integer));
        Self(p * self.0 + q * self.1, r * self.0 + s * self.1)
    }
}

/// Integer 2×2 matrix, rows first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sl2Matrix(pub [[i128; 2]; 2]);

impl Sl2Matrix {
    pub const IDENTITY: Self = Self([[1, 0], [0, 1]]);
    /// `S : (a, b) ↦ (-b, a)`.
    pub const S: Self = Self([[0, -1], [1, 0]]);
    /// `T : (a, b) ↦ (a + b, b)`.
    pub const T: Self = Self([[1, 1], [0, 1]]);
    pub const T_INV: Self = Self([[1, -1], [0, 1]]);

    pub fn det(&self) -> i128 {
        let [[p, q], [r, s]] = self.0;
        p * s - q * r
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (self.0, other.0);
        let e = |i: usize, j: usize| a[i][0] * b[0][j] + a[i][1] * b[1][j];
        Self([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Product of a word in `{S, T, T⁻¹}` (leftmost letter applied last).
    pub fn word(letters: &[Self]) -> Self {
        letters.iter().fold(Self::IDENTITY, |acc, m| acc.mul(m))
    }
}

/// Positive generator of `aZ + bZ ⊂ Q`; zero for the zero pair.
pub fn subgroup_generator(a: Rational, b: Rational) -> Rational {
    let d = a.denom().lcm(b.denom());
    let m = (a * Rational::from_integer(d)).to_integer();
    let n = (b * Rational::from_integer(d)).to_integer();
    Rational::new(m.abs().gcd(&n.abs()), d)
}

/// Complete `SL(2, Z)` invariant of a rational pair.
pub fn sl2_invariant(p: &RationalPair) -> Rational {
    subgroup_generator(p.0, p.1)
}

/// Equivalence verdict and, if found within `witness_depth` letters, a matrix `M` with `M a = b`.
pub fn sl2_equivalent(a: &RationalPair, b: &RationalPair, witness_depth: usize) -> (bool, Option<Sl2Matrix>) {
    if sl2_invariant(a) != sl2_invariant(b) {
        return (false, None);
    }
    (true, sl2_witness(a, b, witness_depth))
}

/// Breadth-first search over words in `S`, `T`, `T⁻¹`, deduplicated on the image vector.
pub fn sl2_witness(a: &RationalPair, b: &RationalPair, depth: usize) -> Option<Sl2Matrix> {
    if a == b {
        return Some(Sl2Matrix::IDENTITY);
    }
    let mut seen = HashSet::from([*a]);
    let mut queue = VecDeque::from([(*a, Sl2Matrix::IDENTITY, 0usize)]);
    while let Some((v, m, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for g in [Sl2Matrix::S, Sl2Matrix::T, Sl2Matrix::T_INV] {
            let w = v.apply(&g);
            if !seen.insert(w) {
                continue;
            }
            let gm = g.mul(&m);
            if w == *b {
                return Some(gm);
            }
            queue.push_back((w, gm, d + 1));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Signatures and orbit comparison

/// Mass signature with exact rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalSignature {
    pub levels: Vec<Vec<Rational>>,
}

impl RationalSignature {
    pub fn to_float(&self) -> MassSignature {
        MassSignature::new(
            self.levels.iter().map(|l| l.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect()).collect(),
        )
    }
}

/// A signature as read from JSON: floating point or exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Signature {
    Float(MassSignature),
    Rational(RationalSignature),
}

#[derive(Serialize, Deserialize)]
struct SignatureDoc {
    levels: Vec<Vec<Value>>,
    #[serde(default)]
    rational: bool,
}

fn parse_rational(v: &Value) -> Result<Rational> {
    let bad = || FlagError::InvalidInput(format!("{v} is not an exact rational"));
    match v {
        Value::Number(n) => n.as_i64().map(|i| Rational::from_integer(i as i128)).ok_or_else(bad),
        Value::String(s) => {
            let (p, q) = s.split_once('/').unwrap_or((s.as_str(), "1"));
            let p: i128 = p.trim().parse().map_err(|_| bad())?;
            let q: i128 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        _ => Err(bad()),
    }
}

fn format_rational(r: &Rational) -> Value {
    if r.is_integer() {
        match i64::try_from(*r.numer()) {
            Ok(i) => Value::from(i),
            Err(_) => Value::from(r.numer().to_string()),
        }
    } else {
        Value::from(format!("{}/{}", r.numer(), r.denom()))
    }
}

impl Signature {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SignatureDoc =
            serde_json::from_str(text).map_err(|e| FlagError::InvalidInput(format!("signature: {e}")))?;
        if doc.rational {
            let levels = doc.levels.iter().map(|l| l.iter().map(parse_rational).collect()).collect::<Result<_>>()?;
            Ok(Self::Rational(RationalSignature { levels }))
        } else {
            let levels = doc
                .levels
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|v| v.as_f64().ok_or_else(|| FlagError::InvalidInput(format!("{v} is not a number"))))
                        .collect()
                })
                .collect::<Result<_>>()?;
            Ok(Self::Float(MassSignature::new(levels)))
        }
    }

    pub fn to_json(&self) -> String {
        let doc = match self {
            Self::Float(s) => SignatureDoc {
                levels: s.levels.iter().map(|l| l.iter().map(|&x| Value::from(x)).collect()).collect(),
                rational: false,
            },
            Self::Rational(s) => SignatureDoc {
                levels: s.levels.iter().map(|l| l.iter().map(format_rational).collect()).collect(),
                rational: true,
            },
        };
        serde_json::to_string_pretty(&doc).expect("signature serializes")
    }

    pub fn to_float(&self) -> MassSignature {
        match self {
            Self::Float(s) => s.clone(),
            Self::Rational(r) => r.to_float(),
        }
    }
}

fn shape(levels: &[Vec<impl Sized>]) -> Vec<usize> {
    levels.iter().map(Vec::len).collect()
}

fn check_shape(a: &[Vec<impl Sized>], b: &[Vec<impl Sized>], group: SymmetryGroup) -> Result<()> {
    let (sa, sb) = (shape(a), shape(b));
    if sa != sb {
        return Err(FlagError::ShapeMismatch(format!("signature shapes {sa:?} and {sb:?} differ")));
    }
    let ok = match group {
        SymmetryGroup::Trivial => true,
        SymmetryGroup::Dihedral => sa.len() == 2 && sa[0] == sa[1] && sa[0] >= 1,
        SymmetryGroup::Hyperoct => !sa.is_empty() && sa.iter().all(|&l| l == 2),
        SymmetryGroup::Sl2z => sa == [2],
    };
    if ok {
        Ok(())
    } else {
        Err(FlagError::ShapeMismatch(format!("shape {sa:?} does not fit the {group} group")))
    }
}

fn pairs_of(levels: &[Vec<f64>]) -> Vec<(f64, f64)> {
    levels.iter().map(|l| (l[0], l[1])).collect()
}

/// Whether two floating-point signatures lie in one orbit of `group`.
pub fn same_orbit(a: &MassSignature, b: &MassSignature, group: SymmetryGroup) -> Result<bool> {
    check_shape(&a.levels, &b.levels, group)?;
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| float_eq(p, q));
    Ok(match group {
        SymmetryGroup::Trivial => a.levels.iter().zip(&b.levels).all(|(x, y)| close(x, y)),
        SymmetryGroup::Dihedral => {
            let (ca, _) = dihedral_canonicalize(&a.levels[0], &a.levels[1])?;
            let (cb, _) = dihedral_canonicalize(&b.levels[0], &b.levels[1])?;
            close(&ca.0, &cb.0) && close(&ca.1, &cb.1)
        }
        SymmetryGroup::Hyperoct => {
            let (ca, _) = hyperoct_canonicalize(&pairs_of(&a.levels));
            let (cb, _) = hyperoct_canonicalize(&pairs_of(&b.levels));
            ca.iter().zip(&cb).all(|(p, q)| float_eq(&p.0, &q.0) && float_eq(&p.1, &q.1))
        }
        SymmetryGroup::Sl2z => {
            return Err(FlagError::Unsupported("SL(2,Z) orbits are decided only for exact rational signatures".into()))
        }
    })
}

/// Exact orbit comparison of rational signatures.
pub fn same_orbit_rational(a: &RationalSignature, b: &RationalSignature, group: SymmetryGroup) -> Result<bool> {
    check_shape(&a.levels, &b.levels, group)?;
    Ok(match group {
        SymmetryGroup::Trivial => a == b,
        SymmetryGroup::Dihedral => {
            let canon = |s: &RationalSignature| -> Result<(Vec<Rational>, Vec<Rational>)> {
                Ok(canonicalize_with(dihedral_images(&s.levels[0], &s.levels[1])?, Rational::cmp, |x, y| x == y).0)
            };
            canon(a)? == canon(b)?
        }
        SymmetryGroup::Hyperoct => {
            let sorted = |s: &RationalSignature| -> Vec<(Rational, Rational)> {
                s.levels.iter().map(|l| (l[0].min(l[1]), l[0].max(l[1]))).collect()
            };
            sorted(a) == sorted(b)
        }
        SymmetryGroup::Sl2z => {
            subgroup_generator(a.levels[0][0], a.levels[0][1]) == subgroup_generator(b.levels[0][0], b.levels[0][1])
        }
    })
}

/// Orbit comparison dispatching on the signature kind.
pub fn same_orbit_any(a: &Signature, b: &Signature, group: SymmetryGroup) -> Result<bool> {
    match (a, b) {
        (Signature::Rational(x), Signature::Rational(y)) => same_orbit_rational(x, y, group),
        _ => same_orbit(&a.to_float(), &b.to_float(), group),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i128, q: i128) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn dihedral_examples() {
        assert_eq!(dihedral_canonicalize(&[1.0; 3], &[1.0; 3]).unwrap().1, 1);
        assert_eq!(dihedral_canonicalize(&[1.0, 2.0, 3.0], &[0.5, 0.5, 1.0]).unwrap().1, 6);
        assert_eq!(dihedral_canonicalize(&[7.0], &[2.0]).unwrap().1, 1);
        assert!(matches!(dihedral_canonicalize(&[1.0, 2.0], &[1.0]), Err(FlagError::LengthMismatch { .. })));
    }

    #[test]
    fn reflection_relabels_edges_geometrically() {
        // vertex i -> -i sends edge [0,1] to [-1,0] = edge k-1
        let imgs = dihedral_images(&[0, 1, 2, 3], &[10, 11, 12, 13]).unwrap();
        assert_eq!(imgs[4], (vec![0, 3, 2, 1], vec![13, 12, 11, 10]));
        assert_eq!(imgs[1], (vec![1, 2, 3, 0], vec![11, 12, 13, 10]));
    }

    #[test]
    fn symmetric_necklace_has_small_orbit() {
        // Γ = (1,2,1,2), w = (3,3,3,3): rotations by 2 and two reflections fix it
        let (_, orbit) = dihedral_canonicalize(&[1.0, 2.0, 1.0, 2.0], &[3.0; 4]).unwrap();
        assert_eq!(orbit, 2);
        assert_eq!(dihedral_orbit_by_enumeration(&[1.0, 2.0, 1.0, 2.0], &[3.0; 4]).unwrap(), 2);
    }

    #[test]
    fn hyperoct_examples() {
        assert_eq!(hyperoct_canonicalize(&[(1.0, 1.0), (3.0, 2.0)]), (vec![(1.0, 1.0), (2.0, 3.0)], 2));
        assert_eq!(hyperoct_canonicalize(&[(1.0, 1.0), (4.0, 4.0)]).1, 1);
        assert_eq!(hyperoct_canonicalize(&[(1.0, 2.0), (3.0, 4.0), (6.0, 5.0)]).1, 8);
    }

    #[test]
    fn sl2_examples() {
        assert_eq!(sl2_invariant(&RationalPair::new(r(4, 3), r(2, 3)).unwrap()), r(2, 3));
        assert_eq!(sl2_invariant(&RationalPair::from_integers(2, 3).unwrap()), r(1, 1));
        assert_eq!(sl2_invariant(&RationalPair::from_integers(0, 5).unwrap()), r(5, 1));
        assert_eq!(RationalPair::from_integers(0, 0), Err(FlagError::ZeroPair));
        assert_eq!(subgroup_generator(r(0, 1), r(0, 1)), r(0, 1));
    }

    #[test]
    fn sl2_witness_search() {
        let a = RationalPair::from_integers(2, 3).unwrap();
        let b = RationalPair::from_integers(1, 1).unwrap();
        let (eq, w) = sl2_equivalent(&a, &b, 10);
        let w = w.unwrap();
        assert!(eq);
        assert_eq!(w.det(), 1);
        assert_eq!(a.apply(&w), b);
        let c = RationalPair::from_integers(2, 4).unwrap();
        assert_eq!(sl2_equivalent(&c, &a, 10), (false, None));
        assert_eq!(sl2_equivalent(&a, &a, 0), (true, Some(Sl2Matrix::IDENTITY)));
    }

    #[test]
    fn sl2_generators_preserve_invariant() {
        let p = RationalPair::new(r(-7, 6), r(5, 4)).unwrap();
        for g in [Sl2Matrix::S, Sl2Matrix::T, Sl2Matrix::T_INV] {
            assert_eq!(sl2_invariant(&p.apply(&g)), sl2_invariant(&p));
        }
    }

    #[test]
    fn orbit_comparison() {
        let a = MassSignature::new(vec![vec![1.0, 2.0, 3.0], vec![0.5, 0.7, 1.0]]);
        let b = MassSignature::new(vec![vec![2.0, 3.0, 1.0], vec![0.7, 1.0, 0.5]]);
        assert!(same_orbit(&a, &b, SymmetryGroup::Dihedral).unwrap());
        assert!(!same_orbit(&a, &b, SymmetryGroup::Trivial).unwrap());
        let c = MassSignature::new(vec![vec![1.0, 2.0, 3.0], vec![0.5, 0.7, 1.1]]);
        assert!(!same_orbit(&a, &c, SymmetryGroup::Dihedral).unwrap());
        let s1 = MassSignature::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let s2 = MassSignature::new(vec![vec![2.0, 1.0], vec![3.0, 4.0]]);
        assert!(same_orbit(&s1, &s2, SymmetryGroup::Hyperoct).unwrap());
        assert!(matches!(same_orbit(&a, &s1, SymmetryGroup::Dihedral), Err(FlagError::ShapeMismatch(_))));
    }

    #[test]
    fn signature_json_round_trip() {
        let text = r#"{"levels": [[2, "4/6"]], "rational": true}"#;
        let sig = Signature::from_json(text).unwrap();
        assert_eq!(sig, Signature::Rational(RationalSignature { levels: vec![vec![r(2, 1), r(2, 3)]] }));
        assert_eq!(Signature::from_json(&sig.to_json()).unwrap(), sig);
        let f = Signature::from_json(r#"{"levels": [[0.5, 1.5]]}"#).unwrap();
        assert_eq!(Signature::from_json(&f.to_json()).unwrap(), f);
    }
}
