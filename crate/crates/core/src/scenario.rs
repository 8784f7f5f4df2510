//! File formats: simulation scenarios, circle densities and trajectory CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::flag::{build_flag, FlagDoc, FlagLevels, WeightedFlag};
use crate::flow::{self, FlowDiagnostics, HamiltonianField, Scheme};
use crate::symplectic::TestFunction;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| FlagError::InvalidInput(format!("{}: {e}", path.display())))
}

pub fn load_flag(path: &Path) -> Result<WeightedFlag> {
    WeightedFlag::from_json(&read_text(path)?)
}

/// A flag given either inline or as a path relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlagSource {
    Path(PathBuf),
    Inline(FlagDoc),
}

/// Hamiltonian flow run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub flag: FlagSource,
    pub hamiltonian: TestFunction,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Trajectory frames are written every this many steps (0: endpoints only).
    #[serde(default)]
    pub record_every: usize,
}

fn default_t() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-3
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FlagError::InvalidInput(format!("scenario JSON: {e}")))
    }

    /// Parse a scenario file; a relative flag path resolves against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut sc = Self::from_json(&read_text(path)?)?;
        if let FlagSource::Path(p) = &sc.flag {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                sc.flag = FlagSource::Path(base.join(p));
            }
        }
        Ok(sc)
    }

    pub fn build_flag(&self) -> Result<WeightedFlag> {
        let flag = match &self.flag {
            FlagSource::Path(p) => load_flag(p)?,
            FlagSource::Inline(doc) => build_flag(doc)?,
        };
        self.hamiltonian.check_dim(flag.dim())?;
        Ok(flag)
    }
}

/// Result of a recorded simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub flag: WeightedFlag,
    pub trajectory_csv: String,
    pub diagnostics: FlowDiagnostics,
}

fn csv_error(e: impl std::fmt::Display) -> FlagError {
    FlagError::InvalidInput(format!("csv: {e}"))
}

/// Append one frame: a row per point (weight in the density column), per
/// loop vertex and per torus grid node.
fn write_frame(w: &mut csv::Writer<Vec<u8>>, t: f64, flag: &WeightedFlag) -> Result<()> {
    let dim = flag.dim();
    let mut row = |level: &str, index: usize, x: &[f64], d: f64| -> Result<()> {
        let mut rec = Vec::with_capacity(dim + 4);
        rec.push(t.to_string());
        rec.push(level.to_string());
        rec.push(index.to_string());
        rec.extend(x.iter().map(f64::to_string));
        rec.push(d.to_string());
        w.write_record(&rec).map_err(csv_error)
    };
    if let Some(points) = flag.point_set() {
        for p in 0..points.len() {
            row("points", p, points.position(p), points.weights()[p])?;
        }
    }
    match flag.levels() {
        FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => {
            for i in 0..c.len() {
                row("loop", i, c.vertex(i), c.density()[i])?;
            }
        }
        FlagLevels::Torus(g) | FlagLevels::MeridiansInTorus { torus: g, .. } => {
            for i in 0..g.rows() {
                for j in 0..g.cols() {
                    row("torus", i * g.cols() + j, g.point(i, j), g.density()[i * g.cols() + j])?;
                }
            }
        }
        FlagLevels::Points(_) => {}
    }
    Ok(())
}

/// Run the Hamiltonian flow and record the trajectory as CSV with columns
/// `t, level, index, x_1, ..., x_dim, density`.
pub fn simulate(flag: &WeightedFlag, f: &TestFunction, t: f64, dt: f64, scheme: Scheme, every: usize) -> Result<Simulation> {
    f.check_dim(flag.dim())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "level".to_string(), "index".to_string()];
    header.extend((1..=flag.dim()).map(|k| format!("x_{k}")));
    header.push("density".to_string());
    w.write_record(&header).map_err(csv_error)?;
    let mut failure = None;
    let every = if every == 0 { usize::MAX } else { every };
    let (out, diagnostics) = flow::transport(flag, &HamiltonianField(f), t, dt, scheme, every, |_, time, fl| {
        if failure.is_none() {
            failure = write_frame(&mut w, time, fl).err();
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let bytes = w.into_inner().map_err(csv_error)?;
    let trajectory_csv = String::from_utf8(bytes).map_err(csv_error)?;
    Ok(Simulation { flag: out, trajectory_csv, diagnostics })
}

/// Circle density file: `{"n": 256, "values": [...], "marked": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDoc {
    pub n: usize,
    pub values: Vec<f64>,
    #[serde(default)]
    pub marked: Vec<usize>,
}

impl DensityDoc {
    pub fn new(values: Vec<f64>, marked: Vec<usize>) -> Self {
        Self { n: values.len(), values, marked }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self =
            serde_json::from_str(text).map_err(|e| FlagError::InvalidInput(format!("density JSON: {e}")))?;
        if doc.n != doc.values.len() {
            return Err(FlagError::LengthMismatch { left: doc.n, right: doc.values.len() });
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("density serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::{DiscreteLoop, WeightedPointSet};

    fn flag() -> WeightedFlag {
        let curve = DiscreteLoop::circle(2, 16, 1.0, |_| 1.0, vec![]).unwrap();
        let pts = WeightedPointSet::new(2, &[curve.vertex(0).to_vec()], vec![2.0]).unwrap();
        WeightedFlag::points_in_loop(pts, curve, 1e-12).unwrap()
    }

    #[test]
    fn scenario_with_inline_flag() {
        let doc = flag().to_doc();
        let text = format!(
            r#"{{"flag": {}, "hamiltonian": {{"poly": [{{"exponents": [2, 0], "coeff": 0.5}}], "bumps": []}}, "t": 0.5}}"#,
            doc.to_json()
        );
        let sc = Scenario::from_json(&text).unwrap();
        assert_eq!(sc.dt, 1e-3);
        assert_eq!(sc.scheme, Scheme::Rk4);
        assert_eq!(sc.build_flag().unwrap(), flag());
    }

    #[test]
    fn trajectory_has_one_row_per_sample() {
        let f = TestFunction::rotation(2);
        let sim = simulate(&flag(), &f, 0.01, 1e-3, Scheme::Rk4, 5).unwrap();
        let lines: Vec<&str> = sim.trajectory_csv.lines().collect();
        assert_eq!(lines[0], "t,level,index,x_1,x_2,density");
        // frames at steps 0, 5, 10; 17 rows each
        assert_eq!(lines.len(), 1 + 3 * 17);
        assert!(lines[1].starts_with("0,points,0,1,0,2"));
    }

    #[test]
    fn density_length_is_checked() {
        assert!(DensityDoc::from_json(r#"{"n": 3, "values": [1, 2]}"#).is_err());
        let d = DensityDoc::new(vec![1.0, 2.0], vec![0]);
        assert_eq!(DensityDoc::from_json(&d.to_json()).unwrap(), d);
    }
}
