//! Property suites behind `flagsim check`.
//!
//! Each criterion runs a seeded family of cases (in parallel, collected in
//! seed order), records summary metrics and the first few failures, and
//! decides pass/fail against fixed thresholds. Reports carry no timings so
//! that equal seeds give byte-identical JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cli;
use crate::error::{FlagError, Result};
use crate::flag::{build_flag, component_masses, LevelDoc, WeightedFlag};
use crate::flow::{self, flow_flag, flow_point, HamiltonianField, LinearField, Scheme};
use crate::homology::{self, Rational, RationalPair, RationalSignature, Signature, Sl2Matrix, SymmetryGroup};
use crate::isodrast;
use crate::moment;
use crate::moser;
use crate::quadrature;
use crate::random::{self, density_pair, gentle_hamiltonian, marks_at, random_test_function, LoopRecipe, SpeedRecipe};
use crate::scenario::{self, DensityDoc, Scenario};
use crate::symplectic::action_integral;

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "moment_identity"),
    (2, "kernel"),
    (3, "conservation"),
    (4, "orbit_counts"),
    (5, "sl2z"),
    (6, "moser"),
    (7, "injectivity"),
    (8, "integrator"),
    (9, "determinism"),
];

/// A named group of criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Symplectic,
    Homology,
    Transport,
    Criterion(u8),
}

impl Suite {
    pub fn ids(&self) -> Vec<u8> {
        match self {
            Self::All => (1..=9).collect(),
            Self::Symplectic => vec![1, 2, 3, 8],
            Self::Homology => vec![4, 5],
            Self::Transport => vec![6, 7],
            Self::Criterion(id) => vec![*id],
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::All => "all".into(),
            Self::Symplectic => "symplectic".into(),
            Self::Homology => "homology".into(),
            Self::Transport => "transport".into(),
            Self::Criterion(id) => criterion_name(*id).into(),
        }
    }
}

fn criterion_name(id: u8) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1)
}

impl FromStr for Suite {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => return Ok(Self::All),
            "symplectic" => return Ok(Self::Symplectic),
            "homology" => return Ok(Self::Homology),
            "transport" => return Ok(Self::Transport),
            _ => {}
        }
        if let Ok(id) = s.parse::<u8>() {
            if (1..=9).contains(&id) {
                return Ok(Self::Criterion(id));
            }
        }
        CRITERIA
            .iter()
            .find(|c| c.1 == s)
            .map(|c| Self::Criterion(c.0))
            .ok_or_else(|| FlagError::InvalidInput(format!("unknown suite {s:?}")))
    }
}

/// Run parameters shared by all criteria.
#[derive(Debug, Clone, Default)]
pub struct CheckConfig {
    /// Base loop resolution (default 256; a multiple of 16, at least 64).
    pub nv: Option<usize>,
    /// Seeds for every randomized criterion; each criterion has its own default count.
    pub seeds: Option<Vec<u64>>,
    /// Scenario files to simulate and audit.
    pub scenarios: Vec<PathBuf>,
}

impl CheckConfig {
    fn seeds_or(&self, count: u64) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..count).collect())
    }

    fn nv(&self) -> usize {
        self.nv.unwrap_or(256)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.nv();
        if nv < 64 || !nv.is_multiple_of(random::MARK_SLOTS) {
            return Err(FlagError::InvalidInput(format!("--nv {nv} must be a multiple of 16 and at least 64")));
        }
        if self.seeds.as_ref().is_some_and(Vec::is_empty) {
            return Err(FlagError::InvalidInput("empty seed list".into()));
        }
        Ok(())
    }
}

const MAX_LISTED_FAILURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

impl CriterionReport {
    fn new(id: u8) -> Self {
        Self { id, name: criterion_name(id).into(), passed: true, cases: 0, metrics: BTreeMap::new(), failures: vec![] }
    }

    fn set(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn max(&mut self, key: &str, v: f64) {
        let e = self.metrics.entry(key.into()).or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }

    fn min(&mut self, key: &str, v: f64) {
        let e = self.metrics.entry(key.into()).or_insert(f64::INFINITY);
        *e = e.min(v);
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.passed = false;
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(msg.into());
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(msg());
        }
    }

    pub fn summary_line(&self) -> String {
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        format!(
            "criterion {} {}: {} ({} cases; {})",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.cases,
            metrics.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub path: String,
    pub passed: bool,
    pub reproducible: bool,
    pub steps: usize,
    pub max_exact_drift: f64,
    pub max_action_drift: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub nv: usize,
    pub seeds: Option<Vec<u64>>,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
    pub scenarios: Vec<ScenarioReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.criteria.iter().map(CriterionReport::summary_line).collect();
        for s in &self.scenarios {
            out.push(format!("scenario {}: {}", s.path, if s.passed { "PASS" } else { "FAIL" }));
        }
        out
    }

    pub fn criterion(&self, id: u8) -> Option<&CriterionReport> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

/// Run a suite; configuration errors are returned, property failures are reported.
pub fn run(suite: Suite, cfg: &CheckConfig) -> Result<Report> {
    cfg.validate()?;
    let criteria = suite.ids().into_iter().map(|id| run_criterion(id, cfg)).collect();
    let scenarios = cfg.scenarios.iter().map(|p| audit_scenario(p)).collect();
    let mut report =
        Report { suite: suite.name(), nv: cfg.nv(), seeds: cfg.seeds.clone(), passed: true, criteria, scenarios };
    report.passed = report.criteria.iter().all(|c| c.passed) && report.scenarios.iter().all(|s| s.passed);
    Ok(report)
}

pub fn run_criterion(id: u8, cfg: &CheckConfig) -> CriterionReport {
    match id {
        1 => moment_identity(cfg),
        2 => kernel(cfg),
        3 => conservation(cfg),
        4 => orbit_counts(cfg),
        5 => sl2z(cfg),
        6 => moser_transport(cfg),
        7 => injectivity(cfg),
        8 => integrator(cfg),
        9 => determinism(cfg),
        _ => {
            let mut r = CriterionReport::new(id);
            r.fail("no such criterion");
            r
        }
    }
}

/// Evaluate `case` on every seed in parallel; results come back in seed order.
fn per_seed<T: Send>(seeds: &[u64], case: impl Fn(u64) -> Result<T> + Sync) -> Vec<(u64, Result<T>)> {
    seeds.par_iter().map(|&s| (s, case(s))).collect()
}

const SALT_MOMENT: u64 = 0x6d6f_6d65;
const SALT_ORBITS: u64 = 0x6f72_6269;
const SALT_SL2: u64 = 0x736c_327a;
const SALT_MOSER: u64 = 0x6d6f_7365;
const SALT_INJECT: u64 = 0x696e_6a65;
const SALT_JACOBIAN: u64 = 0x6a61_636f;

// ---------------------------------------------------------------------------
// 1. moment-map identity

pub const MOMENT_TOL: f64 = 1e-3;
pub const MOMENT_STEP: f64 = 1e-5;
pub const MOMENT_BUDGET: Duration = Duration::from_secs(60);

fn moment_identity(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(1);
    let nv = cfg.nv();
    let seeds = cfg.seeds_or(50);
    let start = Instant::now();
    let results = per_seed(&seeds, |s| {
        let flag = LoopRecipe::random(s, 2, 3).flag(nv)?;
        let f = random_test_function(&mut random::rng(s ^ SALT_MOMENT), 2, 1.0);
        let tan = isodrast::random_tangent(&flag, s)?;
        isodrast::moment_identity_residual(&flag, &f, &tan, MOMENT_STEP)
    });
    let elapsed = start.elapsed();
    for (s, res) in results {
        r.cases += 1;
        match res {
            Ok(v) => {
                r.max("max_residual", v);
                r.check(v < MOMENT_TOL, || format!("seed {s}: residual {v:e}"));
            }
            Err(e) => r.fail(format!("seed {s}: {e}")),
        }
    }
    r.check(elapsed < MOMENT_BUDGET, || "runtime budget of 60 s exceeded".into());
    r
}

// ---------------------------------------------------------------------------
// 2. kernel of the leafwise form

pub const KERNEL_TRIALS: usize = 5;
pub const REFINEMENT_RATIO: (f64, f64) = (4.0 * 0.7, 4.0 * 1.3);
pub const CONTROL_FLOOR: f64 = 1e-3;

fn kernel(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(2);
    let nv = cfg.nv();
    let results = per_seed(&cfg.seeds_or(10), |s| {
        let recipe = LoopRecipe::random(s, 2, 3);
        let z = SpeedRecipe::random(s, &recipe.slots);
        let coarse = recipe.flag(nv)?;
        let r1 = isodrast::kernel_residual(&coarse, &z.sample(nv)?, KERNEL_TRIALS, s)?;
        let r2 = isodrast::kernel_residual(&recipe.flag(2 * nv)?, &z.sample(2 * nv)?, KERNEL_TRIALS, s)?;
        // same speed profile without the factor vanishing at the marks
        let h = quadrature::spacing(nv);
        let zc: Vec<f64> = (0..nv).map(|i| 1.0 + 0.5 * z.q.eval(i as f64 * h)).collect();
        let control = isodrast::reparametrization_tangent(&coarse, &zc)?;
        let c = isodrast::pairing_residual(&coarse, &control, KERNEL_TRIALS, s)?;
        Ok((r1, r2, c))
    });
    for (s, res) in results {
        r.cases += 1;
        match res {
            Ok((r1, r2, c)) => {
                let ratio = r1 / r2;
                r.max("max_residual_coarse", r1);
                r.max("max_residual_fine", r2);
                r.min("min_ratio", ratio);
                r.max("max_ratio", ratio);
                r.min("min_control", c);
                r.check((REFINEMENT_RATIO.0..=REFINEMENT_RATIO.1).contains(&ratio), || {
                    format!("seed {s}: refinement ratio {ratio:.3} ({r1:e} -> {r2:e})")
                });
                r.check(c > CONTROL_FLOOR, || format!("seed {s}: control residual {c:e}"));
            }
            Err(e) => r.fail(format!("seed {s}: {e}")),
        }
    }
    r
}

// ---------------------------------------------------------------------------
// 3. conservation along Hamiltonian flows

pub const AREA_DRIFT_TOL: f64 = 1e-6;
pub const SCALING_TOL: f64 = 1e-9;

fn conservation(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(3);
    let nv = cfg.nv();
    let results = per_seed(&cfg.seeds_or(20), |s| {
        let flag = LoopRecipe::random(s, 2, 3).flag(nv)?;
        let (_, diag) = flow_flag(&flag, &gentle_hamiltonian(s, 2), 1.0, 1e-3, Scheme::Rk4)?;
        Ok(diag)
    });
    for (s, res) in results {
        r.cases += 1;
        match res {
            Ok(diag) => {
                let area = diag.drift_of("action_integral").map_or(f64::INFINITY, |d| d.relative_drift);
                let exact = diag
                    .drift
                    .iter()
                    .filter(|d| d.name.starts_with("mass[") || d.name == "nesting_residual")
                    .map(|d| d.relative_drift)
                    .fold(0.0, f64::max);
                r.max("max_area_drift", area);
                r.max("max_exact_drift", exact);
                r.check(area < AREA_DRIFT_TOL, || format!("seed {s}: area drift {area:e}"));
                r.check(exact == 0.0 && diag.final_nesting_residual == 0.0, || {
                    format!("seed {s}: weights, arc masses or nesting moved by {exact:e}")
                });
            }
            Err(e) => r.fail(format!("seed {s}: {e}")),
        }
    }
    match scaling_control(nv) {
        Ok(ratio) => {
            r.set("scaling_area_ratio", ratio);
            r.check((ratio - 1.21).abs() < SCALING_TOL, || format!("scaling control ratio {ratio}"));
        }
        Err(e) => r.fail(format!("scaling control: {e}")),
    }
    r
}

/// Area ratio after the time-1 flow of `x' = ln(1.1) x`.
pub fn scaling_control(nv: usize) -> Result<f64> {
    let flag = LoopRecipe::random(0, 2, 3).flag(nv)?;
    let field = LinearField::scaling(2, 1.1_f64.ln());
    let (out, _) = flow::transport(&flag, &field, 1.0, 1e-3, Scheme::Rk4, usize::MAX, |_, _, _| {})?;
    let a0 = action_integral(flag.curve().expect("loop flag"));
    let a1 = action_integral(out.curve().expect("loop flag"));
    Ok(a1 / a0)
}

// ---------------------------------------------------------------------------
// 4. orbit counts

fn random_necklace<R: Rng>(rng: &mut R, k: usize, mode: u64) -> (Vec<f64>, Vec<f64>) {
    match mode {
        0 => (vec![rng.gen_range(0.5..2.0); k], vec![rng.gen_range(0.5..2.0); k]),
        1 => {
            let pick = |rng: &mut R| *[1.0, 2.0].choose(rng).expect("nonempty");
            ((0..k).map(|_| pick(rng)).collect(), (0..k).map(|_| pick(rng)).collect())
        }
        _ => ((0..k).map(|_| rng.gen_range(0.5..2.0)).collect(), (0..k).map(|_| rng.gen_range(0.5..2.0)).collect()),
    }
}

fn orbit_counts(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(4);
    let seeds = cfg.seeds_or(100);
    let results = per_seed(&seeds, |s| -> Result<Vec<String>> {
        let mut rng = random::rng(s ^ SALT_ORBITS);
        let mut bad = vec![];
        // dihedral necklaces, k = 1..=6
        let k = 1 + (s % 6) as usize;
        let mode = (s / 6) % 3;
        let (g, w) = random_necklace(&mut rng, k, mode);
        let ((cg, cw), orbit) = homology::dihedral_canonicalize(&g, &w)?;
        let enumerated = homology::dihedral_orbit_by_enumeration(&g, &w)?;
        let uniform = g.iter().all(|x| *x == g[0]) && w.iter().all(|x| *x == w[0]);
        if orbit != enumerated {
            bad.push(format!("dihedral k={k}: formula {orbit} vs enumeration {enumerated}"));
        }
        if (orbit == 1) != uniform {
            bad.push(format!("dihedral k={k}: orbit {orbit} but uniform = {uniform}"));
        }
        if mode == 2 && k >= 2 && orbit != 2 * k {
            bad.push(format!("dihedral k={k}: generic orbit {orbit} ≠ {}", 2 * k));
        }
        if homology::dihedral_canonicalize(&cg, &cw)?.0 != (cg.clone(), cw.clone()) {
            bad.push(format!("dihedral k={k}: canonical form not idempotent"));
        }
        let sig = crate::flag::MassSignature::new(vec![g.clone(), w.clone()]);
        for (ig, iw) in homology::dihedral_images(&g, &w)? {
            let img = crate::flag::MassSignature::new(vec![ig, iw]);
            if !homology::same_orbit(&sig, &img, SymmetryGroup::Dihedral)? {
                bad.push(format!("dihedral k={k}: image not recognised as same orbit"));
            }
        }
        let mut heavier = sig.clone();
        heavier.levels[1][0] += 0.5;
        if homology::same_orbit(&sig, &heavier, SymmetryGroup::Dihedral)? {
            bad.push(format!("dihedral k={k}: different total mass reported as same orbit"));
        }

        // hemisphere pairs of nested spheres, 1..=6 levels
        let levels = 1 + ((s / 3) % 6) as usize;
        let pairs: Vec<(f64, f64)> = (0..levels)
            .map(|_| {
                let a = rng.gen_range(0.5..2.0);
                if rng.gen_bool(0.5) {
                    (a, a)
                } else {
                    (a, rng.gen_range(0.5..2.0))
                }
            })
            .collect();
        let s_count = pairs.iter().filter(|(a, b)| a != b).count();
        let (canon, orbit) = homology::hyperoct_canonicalize(&pairs);
        let images = homology::hyperoct_images(&pairs);
        let mut distinct: Vec<&Vec<(f64, f64)>> = vec![];
        for img in &images {
            if !distinct.contains(&img) {
                distinct.push(img);
            }
        }
        if orbit != 1 << s_count || distinct.len() as u64 != orbit {
            bad.push(format!("hyperoct: orbit {orbit}, 2^s = {}, enumeration {}", 1u64 << s_count, distinct.len()));
        }
        if homology::hyperoct_canonicalize(&canon).0 != canon {
            bad.push("hyperoct: canonical form not idempotent".into());
        }
        let as_sig = |p: &[(f64, f64)]| crate::flag::MassSignature::new(p.iter().map(|&(a, b)| vec![a, b]).collect());
        for img in &images {
            if !homology::same_orbit(&as_sig(&pairs), &as_sig(img), SymmetryGroup::Hyperoct)? {
                bad.push("hyperoct: image not recognised as same orbit".into());
            }
        }
        Ok(bad)
    });
    for (s, res) in results {
        r.cases += 1;
        match res {
            Ok(bad) => {
                for b in bad {
                    r.fail(format!("seed {s}: {b}"));
                }
            }
            Err(e) => r.fail(format!("seed {s}: {e}")),
        }
    }
    r.set("mismatches", r.failures.len() as f64);
    r
}

// ---------------------------------------------------------------------------
// 5. SL(2, Z)

pub const WORD_LENGTH: usize = 8;

fn random_word<R: Rng>(rng: &mut R) -> Vec<Sl2Matrix> {
    let len = rng.gen_range(1..=WORD_LENGTH);
    (0..len).map(|_| *[Sl2Matrix::S, Sl2Matrix::T, Sl2Matrix::T_INV].choose(rng).expect("nonempty")).collect()
}

fn random_rational<R: Rng>(rng: &mut R) -> Rational {
    Rational::new(rng.gen_range(-12..=12), rng.gen_range(1..=9))
}

fn rational_sig(p: &RationalPair) -> RationalSignature {
    RationalSignature { levels: vec![vec![p.0, p.1]] }
}

fn sl2z(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(5);
    let results = per_seed(&cfg.seeds_or(100), |s| -> Result<Vec<String>> {
        let mut rng = random::rng(s ^ SALT_SL2);
        let mut bad = vec![];
        let a = loop {
            if let Ok(p) = RationalPair::new(random_rational(&mut rng), random_rational(&mut rng)) {
                break p;
            }
        };
        let word = random_word(&mut rng);
        let m = Sl2Matrix::word(&word);
        let b = a.apply(&m);
        if m.det() != 1 {
            bad.push("word matrix has determinant ≠ 1".into());
        }
        if homology::sl2_invariant(&a) != homology::sl2_invariant(&b) {
            bad.push(format!("invariant changed along a word of length {}", word.len()));
        }
        if !homology::same_orbit_rational(&rational_sig(&a), &rational_sig(&b), SymmetryGroup::Sl2z)? {
            bad.push("image not recognised as same orbit".into());
        }
        match homology::sl2_equivalent(&a, &b, WORD_LENGTH) {
            (true, Some(w)) if w.det() == 1 && a.apply(&w) == b => {}
            other => bad.push(format!("witness search returned {other:?}")),
        }
        let g = homology::sl2_invariant(&a);
        let doubled = RationalPair::new(g * Rational::from_integer(2), Rational::from_integer(0))?;
        if homology::sl2_equivalent(&a, &doubled, 0).0 {
            bad.push("pair equivalent to twice its generator".into());
        }
        Ok(bad)
    });
    for (s, res) in results {
        r.cases += 1;
        match res {
            Ok(bad) => {
                for b in bad {
                    r.fail(format!("seed {s}: {b}"));
                }
            }
            Err(e) => r.fail(format!("seed {s}: {e}")),
        }
    }
    let p = |a, b| RationalPair::from_integers(a, b).expect("nonzero pair");
    match homology::sl2_equivalent(&p(2, 3), &p(1, 1), 10) {
        (true, Some(w)) => {
            r.set("witness_det", w.det() as f64);
            r.check(w.det() == 1 && p(2, 3).apply(&w) == p(1, 1), || format!("bad witness {w:?}"));
        }
        other => r.fail(format!("(2,3) ~ (1,1) gave {other:?}")),
    }
    r.check(!homology::sl2_equivalent(&p(2, 4), &p(2, 3), 10).0, || "(2,4) reported equivalent to (2,3)".into());
    r
}

// ---------------------------------------------------------------------------
// 6. Moser transport

pub const PUSHFORWARD_TOL: f64 = 5e-4;

fn matched_pair(seed: u64, nv: usize, equal: bool) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    let mut rng = random::rng(seed ^ SALT_MOSER);
    let k = (seed % 5) as usize;
    let slots = random::random_slots(&mut rng, k);
    let (mu, nu) = density_pair(seed, &slots, equal);
    let marks = marks_at(nv, &slots)?;
    let m = mu.sample(nv);
    let mut n = nu.sample(nv);
    if equal {
        let h = quadrature::spacing(nv);
        quadrature::match_arc_masses(&mut n, h, &marks, &moser::arc_masses(&m, &marks))?;
    }
    Ok((m, n, marks))
}

fn pushforward_error(seed: u64, nv: usize) -> Result<f64> {
    let (mu, nu, marks) = matched_pair(seed, nv, true)?;
    let map = moser::moser_map_circle(&mu, &nu, &marks, moser::DEFAULT_TOL)?;
    let pushed = moser::push_density(&map, &mu)?;
    Ok(pushed.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn moser_transport(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(6);
    let nv = cfg.nv();
    let results = per_seed(&cfg.seeds_or(100), |s| {
        let e1 = pushforward_error(s, nv);
        let e2 = pushforward_error(s, 2 * nv);
        let (mu, nu, marks) = matched_pair(s, nv, false)?;
        let rejected = matches!(moser::moser_map_circle(&mu, &nu, &marks, moser::DEFAULT_TOL), Err(FlagError::MassMismatch { .. }));
        Ok((e1, e2, rejected))
    });
    let (mut worst1, mut worst2) = (0.0_f64, 0.0_f64);
    let (mut false_rejections, mut false_acceptances) = (0, 0);
    for (s, res) in results {
        r.cases += 1;
        let (e1, e2, rejected) = match res {
            Ok(v) => v,
            Err(e) => {
                r.fail(format!("seed {s}: {e}"));
                continue;
            }
        };
        match (e1, e2) {
            (Ok(e1), Ok(e2)) => {
                worst1 = worst1.max(e1);
                worst2 = worst2.max(e2);
                r.check(e1 < PUSHFORWARD_TOL, || format!("seed {s}: pushforward error {e1:e}"));
            }
            (Err(e), _) | (_, Err(e)) => {
                false_rejections += 1;
                r.fail(format!("seed {s}: equal-mass pair rejected: {e}"));
            }
        }
        if !rejected {
            false_acceptances += 1;
            r.fail(format!("seed {s}: unequal-mass pair accepted"));
        }
    }
    let ratio = worst1 / worst2;
    r.set("max_error_coarse", worst1);
    r.set("max_error_fine", worst2);
    r.set("refinement_ratio", ratio);
    r.set("false_rejections", false_rejections as f64);
    r.set("false_acceptances", false_acceptances as f64);
    r.check((REFINEMENT_RATIO.0..=REFINEMENT_RATIO.1).contains(&ratio), || {
        format!("refinement ratio {ratio:.3} outside 4 ± 30%")
    });
    r
}

// ---------------------------------------------------------------------------
// 7. injectivity of the moment map

pub const SEPARATION_FLOOR: f64 = 1e-6;
pub const SEPARATION_BUDGET: usize = 4096;

/// A random flag and a copy differing by one small local change.
pub fn perturbed_pair(seed: u64) -> Result<(WeightedFlag, WeightedFlag)> {
    let mut rng = random::rng(seed ^ SALT_INJECT);
    let base = LoopRecipe::random(seed, 2, 3).flag(64)?;
    let mut doc = base.to_doc();
    let marks = base.curve().expect("loop flag").marked().to_vec();
    let delta = 1e-3;
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let step = [delta * angle.cos(), delta * angle.sin()];
    let (head, tail) = doc.levels.split_at_mut(1);
    let (LevelDoc::Points { positions, weights }, LevelDoc::Loop { vertices, density, .. }) = (&mut head[0], &mut tail[0])
    else {
        return Err(FlagError::Unsupported("expected points on a loop".into()));
    };
    match seed % 4 {
        0 => {
            let i = loop {
                let i = rng.gen_range(0..vertices.len());
                if !marks.contains(&i) {
                    break i;
                }
            };
            vertices[i][0] += step[0];
            vertices[i][1] += step[1];
        }
        1 => {
            let p = rng.gen_range(0..weights.len());
            weights[p] *= 1.0 + delta;
        }
        2 => {
            let i = rng.gen_range(0..density.len());
            density[i] += delta;
        }
        _ => {
            let p = rng.gen_range(0..positions.len());
            let m = base.anchors()[p];
            for k in 0..2 {
                positions[p][k] += step[k];
                vertices[m][k] += step[k];
            }
        }
    }
    Ok((base, build_flag(&doc)?))
}

fn injectivity(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(7);
    let results = per_seed(&cfg.seeds_or(100), |s| {
        let (a, b) = perturbed_pair(s)?;
        let found = moment::separate(&a, &b, SEPARATION_BUDGET)?;
        let verified = match &found {
            Some(sep) => {
                let f = sep.test_function();
                (moment::pair(&a, &f)? - moment::pair(&b, &f)?).abs()
            }
            None => 0.0,
        };
        let same = moment::separate(&a, &a.clone(), SEPARATION_BUDGET)?;
        Ok((found.map(|s| s.gap), verified, same.is_none()))
    });
    for (s, res) in results {
        r.cases += 1;
        match res {
            Ok((gap, verified, identical_ok)) => {
                let g = gap.unwrap_or(0.0);
                r.min("min_gap", g);
                r.check(g > SEPARATION_FLOOR, || format!("seed {s}: best gap {g:e}"));
                r.check((verified - g).abs() <= 1e-12 * g.max(1.0), || format!("seed {s}: gap {g:e} not reproduced ({verified:e})"));
                r.check(identical_ok, || format!("seed {s}: identical flags separated"));
            }
            Err(e) => r.fail(format!("seed {s}: {e}")),
        }
    }
    r
}

// ---------------------------------------------------------------------------
// 8. integrator sanity

pub const JACOBIAN_TOL: f64 = 1e-6;
pub const POLYGON_TOL: f64 = 1e-12;

fn determinant(mut a: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).expect("nonempty");
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        det *= a[c * n + c];
        for i in c + 1..n {
            let f = a[i * n + c] / a[c * n + c];
            for k in c..n {
                a[i * n + k] -= f * a[c * n + k];
            }
        }
    }
    det
}

/// `det DΦ` of the time-1 RK4 flow by central differences.
pub fn flow_jacobian_det(seed: u64) -> f64 {
    let dim = if seed.is_multiple_of(2) { 2 } else { 4 };
    let f = gentle_hamiltonian(seed, dim);
    let mut rng = random::rng(seed ^ SALT_JACOBIAN);
    let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let field = HamiltonianField(&f);
    let eps = 1e-5;
    let mut jac = vec![0.0; dim * dim];
    for k in 0..dim {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[k] += eps;
        xm[k] -= eps;
        let (yp, ym) = (flow_point(&field, Scheme::Rk4, &xp, 1.0, 1000), flow_point(&field, Scheme::Rk4, &xm, 1.0, 1000));
        for i in 0..dim {
            jac[i * dim + k] = (yp[i] - ym[i]) / (2.0 * eps);
        }
    }
    determinant(jac, dim)
}

fn integrator(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(8);
    let results = per_seed(&cfg.seeds_or(10), |s| Ok(flow_jacobian_det(s)));
    for (s, res) in results {
        r.cases += 1;
        if let Ok(det) = res {
            let e = (det - 1.0).abs();
            r.max("max_det_error", e);
            r.check(e < JACOBIAN_TOL, || format!("seed {s}: det = {det}"));
        }
    }
    let n = 256;
    match crate::flag::DiscreteLoop::circle(2, n, 1.0, |_| 1.0, vec![]) {
        Ok(c) => {
            let exact = (n as f64 / 2.0) * (std::f64::consts::TAU / n as f64).sin();
            let e = (action_integral(&c) - exact).abs();
            r.set("polygon_action_error", e);
            r.check(e < POLYGON_TOL, || format!("256-gon action off by {e:e}"));
        }
        Err(e) => r.fail(format!("256-gon: {e}")),
    }
    r
}

// ---------------------------------------------------------------------------
// 9. determinism

/// Every JSON/CSV artifact the command layer produces for one seed.
pub fn artifacts(seed: u64) -> Result<Vec<(String, String)>> {
    let mut out = vec![];
    let flag = LoopRecipe::random(seed, 2, 3).flag(64)?;
    let flag_json = flag.to_json();
    let reparsed = WeightedFlag::from_json(&flag_json)?.to_json();
    out.push(("flag.json".into(), flag_json));
    out.push(("flag.reparsed.json".into(), reparsed));
    out.push(("invariants.json".into(), cli::invariants_json(&flag)));

    let sim = scenario::simulate(&flag, &gentle_hamiltonian(seed, 2), 0.05, 1e-3, Scheme::Rk4, 10)?;
    out.push(("trajectory.csv".into(), sim.trajectory_csv));
    out.push(("diagnostics.json".into(), serde_json::to_string_pretty(&sim.diagnostics).expect("serializes")));

    let (mu, nu, marks) = matched_pair(seed, 64, true)?;
    let (mu, nu) = (DensityDoc::new(mu, marks.clone()), DensityDoc::new(nu, marks.clone()));
    out.push(("moser.json".into(), cli::moser_json(&mu, &nu, &marks, moser::DEFAULT_TOL)?));

    let sig = component_masses(&flag);
    let mut rotated = sig.clone();
    for level in &mut rotated.levels {
        level.rotate_left(1);
    }
    out.push((
        "classify.json".into(),
        cli::classify_json(&Signature::Float(sig), &Signature::Float(rotated), SymmetryGroup::Dihedral, 0)?,
    ));
    let (a, b) = perturbed_pair(seed)?;
    out.push(("separate.json".into(), cli::separate_json(&a, &b, 512)?));
    let cfg = CheckConfig { nv: Some(64), seeds: Some(vec![seed]), scenarios: vec![] };
    out.push(("report.json".into(), run(Suite::Homology, &cfg)?.to_json()));
    Ok(out)
}

fn determinism(cfg: &CheckConfig) -> CriterionReport {
    let mut r = CriterionReport::new(9);
    let mut files = 0;
    for s in cfg.seeds_or(3) {
        r.cases += 1;
        match (artifacts(s), artifacts(s)) {
            (Ok(first), Ok(second)) => {
                for ((name, x), (_, y)) in first.iter().zip(&second) {
                    files += 1;
                    r.check(x == y, || format!("seed {s}: {name} differs between runs"));
                }
                let (orig, reparsed) = (&first[0].1, &first[1].1);
                r.check(orig == reparsed, || format!("seed {s}: flag JSON does not round-trip"));
            }
            (Err(e), _) | (_, Err(e)) => r.fail(format!("seed {s}: {e}")),
        }
    }
    r.set("artifacts_compared", files as f64);
    r
}

// ---------------------------------------------------------------------------
// scenario audits

fn audit_scenario(path: &Path) -> ScenarioReport {
    let mut rep = ScenarioReport {
        path: path.display().to_string(),
        passed: false,
        reproducible: false,
        steps: 0,
        max_exact_drift: 0.0,
        max_action_drift: 0.0,
        failure: None,
    };
    let run_once = || -> Result<(String, String, flow::FlowDiagnostics)> {
        let sc = Scenario::load(path)?;
        let flag = sc.build_flag()?;
        let sim = scenario::simulate(&flag, &sc.hamiltonian, sc.t, sc.dt, sc.scheme, sc.record_every)?;
        let diag = serde_json::to_string_pretty(&sim.diagnostics).expect("serializes");
        Ok((sim.trajectory_csv, diag, sim.diagnostics))
    };
    match (run_once(), run_once()) {
        (Ok((c1, d1, diag)), Ok((c2, d2, _))) => {
            rep.reproducible = c1 == c2 && d1 == d2;
            rep.steps = diag.steps;
            for d in &diag.drift {
                if d.name.starts_with("mass[") || d.name == "nesting_residual" {
                    rep.max_exact_drift = rep.max_exact_drift.max(d.relative_drift);
                } else {
                    rep.max_action_drift = rep.max_action_drift.max(d.relative_drift);
                }
            }
            rep.passed = rep.reproducible && rep.max_exact_drift == 0.0;
            if !rep.passed {
                rep.failure = Some("outputs differ between runs or exact invariants drifted".into());
            }
        }
        (Err(e), _) | (_, Err(e)) => rep.failure = Some(e.to_string()),
    }
    rep
}
