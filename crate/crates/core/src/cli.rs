//! The `flagsim` command line: argument grammar and the JSON documents each
//! subcommand emits.
//!
//! Exit codes: 0 on success, 1 on parse or validation errors, 2 when a
//! property suite fails.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{FlagError, Result};
use crate::flag::{component_masses, nesting_residual, FlagLevels, WeightedFlag};
use crate::flow::Scheme;
use crate::homology::{self, RationalPair, Signature, SymmetryGroup};
use crate::moment;
use crate::moser;
use crate::scenario::{self, DensityDoc, Scenario};
use crate::suite::{self, CheckConfig, Suite};
use crate::symplectic::{self, TestFunction};

#[derive(Debug, Parser)]
#[command(name = "flagsim", version, about = "Weighted nonlinear flags in symplectic R^2n")]
pub struct Cli {
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Single seed (shorthand for --seeds N).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Inclusive seed range `a..b` or list `a,b,c`.
    // full path keeps clap from treating the list as a multi-value argument
    #[arg(long, global = true, value_parser = parse_seeds)]
    pub seeds: Option<::std::vec::Vec<u64>>,
    /// Base loop resolution for randomized checks.
    #[arg(long, global = true)]
    pub nv: Option<usize>,
    /// Relative tolerance (arc-mass matching for `moser`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flow a flag under a Hamiltonian; writes diagnostics JSON and a trajectory CSV.
    Simulate(SimulateArgs),
    /// Action integrals, enclosed area and mass signature of a flag.
    Invariants {
        /// Flag JSON file.
        #[arg(long)]
        flag: PathBuf,
    },
    /// Decide whether two signatures lie in one group orbit.
    Classify {
        /// First signature JSON.
        #[arg(long)]
        a: PathBuf,
        /// Second signature JSON.
        #[arg(long)]
        b: PathBuf,
        /// trivial, dihedral, hyperoct or sl2z.
        #[arg(long)]
        group: SymmetryGroup,
        /// Depth of the SL(2,Z) witness search.
        #[arg(long, default_value_t = 12)]
        witness_depth: usize,
    },
    /// Circle map carrying one density to another with equal arc masses.
    Moser {
        /// Source density JSON.
        #[arg(long)]
        source: PathBuf,
        /// Target density JSON.
        #[arg(long)]
        target: PathBuf,
        /// Marked vertices, comma separated; defaults to those of the source file.
        #[arg(long, value_delimiter = ',')]
        marked: Option<Vec<usize>>,
    },
    /// Pair a flag with a test function.
    Pair {
        /// Flag JSON file.
        #[arg(long)]
        flag: PathBuf,
        /// Test function JSON.
        #[arg(long = "test", visible_alias = "function")]
        function: PathBuf,
    },
    /// Search for a bump function separating two flags.
    Separate {
        /// First flag JSON.
        #[arg(long)]
        a: PathBuf,
        /// Second flag JSON.
        #[arg(long)]
        b: PathBuf,
        /// Maximum number of candidate bumps.
        #[arg(long, default_value_t = 4096)]
        budget: usize,
    },
    /// Run property suites and write a report.
    Check {
        /// all, symplectic, homology, transport, or a criterion name or number.
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Scenario files to simulate and audit in addition to the suite.
        #[arg(long, num_args = 1..)]
        scenarios: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's final time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Overrides the scenario's time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Overrides the integrator: rk4 or midpoint.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Overrides the trajectory frame interval in steps.
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Trajectory CSV path; defaults to the `--out` path with a `.csv` extension.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let bad = |_| format!("bad seed list {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if b < a {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(bad)).collect()
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

/// Invariants of a flag as a JSON document.
pub fn invariants_json(flag: &WeightedFlag) -> String {
    let sig = component_masses(flag);
    let mut doc = json!({
        "dimension": flag.dim(),
        "level_dimensions": flag.level_dimensions(),
        "mass_signature": serde_json::from_str::<Value>(&Signature::Float(sig.clone()).to_json()).expect("valid JSON"),
        "level_totals": sig.level_totals(),
        "nesting_residual": nesting_residual(flag),
    });
    match flag.levels() {
        FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => {
            let a = symplectic::action_integral(c);
            doc["enclosed_area"] = json!(a);
            doc["action_integrals"] = json!({ "loop": a });
        }
        FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => {
            let (row, column) = symplectic::meridian_action_pair(t);
            doc["action_integrals"] = json!({ "row": row, "column": column });
            doc["isotropy_residual"] = json!(symplectic::isotropy_residual(t));
        }
        FlagLevels::Points(_) => {}
    }
    to_json(&doc)
}

/// Orbit comparison report for two signatures.
pub fn classify_json(a: &Signature, b: &Signature, group: SymmetryGroup, witness_depth: usize) -> Result<String> {
    let same = homology::same_orbit_any(a, b, group)?;
    let mut doc = json!({ "group": group.to_string(), "same_orbit": same });
    match group {
        SymmetryGroup::Dihedral => {
            for (key, s) in [("a", a), ("b", b)] {
                let f = s.to_float();
                let ((g, w), orbit) = homology::dihedral_canonicalize(&f.levels[0], &f.levels[1])?;
                doc[key] = json!({ "canonical": [g, w], "orbit_size": orbit });
            }
        }
        SymmetryGroup::Hyperoct => {
            for (key, s) in [("a", a), ("b", b)] {
                let pairs: Vec<(f64, f64)> = s.to_float().levels.iter().map(|l| (l[0], l[1])).collect();
                let (canon, orbit) = homology::hyperoct_canonicalize(&pairs);
                doc[key] = json!({ "canonical": canon, "orbit_size": orbit });
            }
        }
        SymmetryGroup::Sl2z => {
            let pair = |s: &Signature| -> Result<RationalPair> {
                match s {
                    Signature::Rational(r) => RationalPair::new(r.levels[0][0], r.levels[0][1]),
                    Signature::Float(_) => Err(FlagError::Unsupported("SL(2,Z) needs rational signatures".into())),
                }
            };
            let (pa, pb) = (pair(a)?, pair(b)?);
            let fmt = |r: homology::Rational| format!("{}/{}", r.numer(), r.denom());
            let (_, witness) = if same { homology::sl2_equivalent(&pa, &pb, witness_depth) } else { (false, None) };
            doc["a"] = json!({ "invariant": fmt(homology::sl2_invariant(&pa)) });
            doc["b"] = json!({ "invariant": fmt(homology::sl2_invariant(&pb)) });
            doc["witness"] = json!(witness.map(|m| m.0.map(|row| row.map(|x| x as i64))));
        }
        SymmetryGroup::Trivial => {}
    }
    Ok(to_json(&doc))
}

/// Moser map between two densities, with the pushforward and its error.
pub fn moser_json(source: &DensityDoc, target: &DensityDoc, marked: &[usize], tol: f64) -> Result<String> {
    let map = moser::moser_map_circle(&source.values, &target.values, marked, tol)?;
    let pushed = moser::push_density(&map, &source.values)?;
    let err = pushed.iter().zip(&target.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(to_json(&json!({
        "n": map.len(),
        "marked": marked,
        "arc_masses": moser::arc_masses(&source.values, marked),
        "targets": map.targets(),
        "pushed": pushed,
        "max_pushforward_error": err,
    })))
}

pub fn pair_json(flag: &WeightedFlag, f: &TestFunction) -> Result<String> {
    Ok(to_json(&json!({ "value": moment::pair(flag, f)? })))
}

pub fn separate_json(a: &WeightedFlag, b: &WeightedFlag, budget: usize) -> Result<String> {
    let doc = match moment::separate(a, b, budget)? {
        Some(s) => json!({
            "found": true,
            "gap": s.gap,
            "bump": { "center": s.center, "width": s.width, "amp": s.amp },
        }),
        None => json!({ "found": false, "bump": null, "gap": 0.0 }),
    };
    Ok(to_json(&doc))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| FlagError::InvalidInput(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

enum Failure {
    Invalid(FlagError),
    Suite,
}

impl From<FlagError> for Failure {
    fn from(e: FlagError) -> Self {
        Self::Invalid(e)
    }
}

fn execute(cli: Cli) -> std::result::Result<(), Failure> {
    let out = cli.out.as_deref();
    let seeds = match (cli.seeds, cli.seed) {
        (Some(s), _) => Some(s),
        (None, Some(s)) => Some(vec![s]),
        (None, None) => None,
    };
    match cli.command {
        Command::Simulate(args) => {
            let sc = Scenario::load(&args.scenario)?;
            let flag = sc.build_flag()?;
            let sim = scenario::simulate(
                &flag,
                &sc.hamiltonian,
                args.t.unwrap_or(sc.t),
                args.dt.unwrap_or(sc.dt),
                args.scheme.unwrap_or(sc.scheme),
                args.record_every.unwrap_or(sc.record_every),
            )?;
            let csv_path = args.trajectory.or_else(|| out.map(|p| p.with_extension("csv")));
            if let Some(p) = csv_path {
                emit(Some(&p), &sim.trajectory_csv)?;
            }
            let diag = serde_json::to_value(&sim.diagnostics).expect("diagnostics serialize");
            emit(out, &to_json(&diag))?;
        }
        Command::Invariants { flag } => emit(out, &invariants_json(&scenario::load_flag(&flag)?))?,
        Command::Classify { a, b, group, witness_depth } => {
            let sa = Signature::from_json(&scenario::read_text(&a)?)?;
            let sb = Signature::from_json(&scenario::read_text(&b)?)?;
            emit(out, &classify_json(&sa, &sb, group, witness_depth)?)?;
        }
        Command::Moser { source, target, marked } => {
            let mu = DensityDoc::load(&source)?;
            let nu = DensityDoc::load(&target)?;
            let marked = marked.unwrap_or_else(|| mu.marked.clone());
            emit(out, &moser_json(&mu, &nu, &marked, cli.tol.unwrap_or(moser::DEFAULT_TOL))?)?;
        }
        Command::Pair { flag, function } => {
            let flag = scenario::load_flag(&flag)?;
            let f: TestFunction = serde_json::from_str(&scenario::read_text(&function)?)
                .map_err(|e| FlagError::InvalidInput(format!("test function JSON: {e}")))?;
            emit(out, &pair_json(&flag, &f)?)?;
        }
        Command::Separate { a, b, budget } => {
            let (a, b) = (scenario::load_flag(&a)?, scenario::load_flag(&b)?);
            emit(out, &separate_json(&a, &b, budget)?)?;
        }
        Command::Check { suite, scenarios } => {
            let cfg = CheckConfig { nv: cli.nv, seeds, scenarios };
            let report = suite::run(suite, &cfg)?;
            for line in report.summary_lines() {
                eprintln!("{line}");
            }
            emit(out, &report.to_json())?;
            if !report.passed {
                return Err(Failure::Suite);
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("FLAGSIM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| FlagError::InvalidInput(format!("FLAGSIM_THREADS={v:?} must be an integer ≥ 1")))?;
    // a pool configured earlier in the same process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(Failure::Suite) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("5..5").unwrap(), vec![5]);
        assert_eq!(parse_seeds("4,7").unwrap(), vec![4, 7]);
        assert!(parse_seeds("3..2").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn help_and_parse_errors() {
        assert_eq!(run(["flagsim", "--help"]), 0);
        assert_eq!(run(["flagsim", "frobnicate"]), 1);
        assert_eq!(run(["flagsim", "classify", "--a", "x", "--b", "y", "--group", "cyclic"]), 1);
        assert_eq!(run(["flagsim", "invariants", "--flag", "/nonexistent/flag.json"]), 1);
    }
}
