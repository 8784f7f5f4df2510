//! Discretized weighted nonlinear flags of depth at most two in `R^{2n}`.
//!
//! Supported shapes are a weighted point set, a density-carrying loop, points
//! marked on a loop, a discretized 2-torus in `R^4`, and marked meridian
//! loops inside such a torus. Coordinates are stored flat, `dim` values per
//! point, in the order `(x_1, y_1, ..., x_n, y_n)`.

use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::quadrature;

/// Minimum number of samples per periodic direction.
pub const MIN_RESOLUTION: usize = 8;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(FlagError::InvalidInput(format!(
            "ambient dimension {dim} is not a positive even number"
        )));
    }
    Ok(())
}

fn flatten(dim: usize, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dim * points.len());
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(FlagError::DimensionMismatch { expected: dim, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(FlagError::InvalidInput(format!("non-finite coordinate in point {i}")));
        }
        out.extend_from_slice(p);
    }
    Ok(out)
}

fn unflatten(dim: usize, coords: &[f64]) -> Vec<Vec<f64>> {
    coords.chunks(dim).map(<[f64]>::to_vec).collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_marks(marks: &[usize], n: usize, what: &str) -> Result<()> {
    for w in marks.windows(2) {
        if w[1] <= w[0] {
            return Err(FlagError::InvalidInput(format!("{what} must be strictly increasing")));
        }
    }
    if let Some(&last) = marks.last() {
        if last >= n {
            return Err(FlagError::InvalidInput(format!("{what} index {last} out of range {n}")));
        }
    }
    Ok(())
}

/// Finitely many points in `R^{2n}`, each with a nonzero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(dim: usize, positions: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if positions.len() != weights.len() {
            return Err(FlagError::LengthMismatch { left: positions.len(), right: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| *w == 0.0 || !w.is_finite()) {
            return Err(FlagError::SignError(format!("point weight {i} is zero or non-finite")));
        }
        let coords = flatten(dim, positions)?;
        let set = Self { dim, coords, weights };
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                if dist(set.position(i), set.position(j)) == 0.0 {
                    return Err(FlagError::DegenerateGeometry(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }
}

/// A closed polyline with a constant-sign density per unit parameter.
///
/// Vertex `i` sits at parameter `θ_i = 2πi/n`; the edge from the last vertex
/// back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    dim: usize,
    coords: Vec<f64>,
    density: Vec<f64>,
    marked: Vec<usize>,
}

impl DiscreteLoop {
    pub fn new(
        dim: usize,
        vertices: &[Vec<f64>],
        density: Vec<f64>,
        marked: Vec<usize>,
    ) -> Result<Self> {
        check_dim(dim)?;
        let coords = flatten(dim, vertices)?;
        Self::from_flat(dim, coords, density, marked)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>, density: Vec<f64>, marked: Vec<usize>) -> Result<Self> {
        check_dim(dim)?;
        let n = coords.len() / dim;
        if !coords.len().is_multiple_of(dim) {
            return Err(FlagError::InvalidInput("coordinate buffer not a multiple of dim".into()));
        }
        if n < MIN_RESOLUTION {
            return Err(FlagError::TooCoarse {
                requested: n,
                reason: format!("loops need at least {MIN_RESOLUTION} vertices"),
            });
        }
        if density.len() != n {
            return Err(FlagError::LengthMismatch { left: n, right: density.len() });
        }
        quadrature::constant_sign(&density)?;
        check_marks(&marked, n, "marked")?;
        let lp = Self { dim, coords, density, marked };
        for i in 0..n {
            if dist(lp.vertex(i), lp.vertex((i + 1) % n)) == 0.0 {
                return Err(FlagError::DegenerateGeometry(format!(
                    "vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        Ok(lp)
    }

    /// Closed curve sampled at `n` uniform parameters with density sampled alike.
    pub fn sample(
        dim: usize,
        n: usize,
        curve: impl Fn(f64) -> Vec<f64>,
        density: impl Fn(f64) -> f64,
        marked: Vec<usize>,
    ) -> Result<Self> {
        let h = quadrature::spacing(n);
        let vertices: Vec<Vec<f64>> = (0..n).map(|i| curve(i as f64 * h)).collect();
        let dens = (0..n).map(|i| density(i as f64 * h)).collect();
        Self::new(dim, &vertices, dens, marked)
    }

    /// Unit circle in the `(x_1, y_1)` plane of `R^dim`, counter-clockwise.
    pub fn circle(dim: usize, n: usize, radius: f64, density: impl Fn(f64) -> f64, marked: Vec<usize>) -> Result<Self> {
        Self::sample(
            dim,
            n,
            |t| {
                let mut p = vec![0.0; dim];
                p[0] = radius * t.cos();
                p[1] = radius * t.sin();
                p
            },
            density,
            marked,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Parameter spacing `2π/n`.
    pub fn spacing(&self) -> f64 {
        quadrature::spacing(self.len())
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let i = i % self.len();
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn marked(&self) -> &[usize] {
        &self.marked
    }

    /// Edge vector from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> Vec<f64> {
        let a = self.vertex(i);
        let b = self.vertex(i + 1);
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }

    /// Centered-difference tangent `dφ/dθ` at vertex `i`.
    pub fn tangent(&self, i: usize) -> Vec<f64> {
        let n = self.len();
        let a = self.vertex(i + n - 1);
        let b = self.vertex(i + 1);
        let s = 0.5 / self.spacing();
        b.iter().zip(a).map(|(x, y)| (x - y) * s).collect()
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.len())
            .map(|i| dist(self.vertex(i), self.vertex(i + 1)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_mass(&self) -> f64 {
        quadrature::periodic_sum(&self.density, self.spacing())
    }

    pub fn arc_masses(&self) -> Vec<f64> {
        quadrature::arc_masses(&self.density, self.spacing(), &self.marked)
    }

    /// Same loop with vertex `shift` relabelled as vertex 0.
    pub fn cyclic_shift(&self, shift: usize) -> Self {
        let n = self.len();
        let shift = shift % n;
        let idx = |i: usize| (i + shift) % n;
        let coords = (0..n).flat_map(|i| self.vertex(idx(i)).to_vec()).collect();
        let density = (0..n).map(|i| self.density[idx(i)]).collect();
        let mut marked: Vec<usize> = self.marked.iter().map(|&m| (m + n - shift) % n).collect();
        marked.sort_unstable();
        Self { dim: self.dim, coords, density, marked }
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub(crate) fn density_mut(&mut self) -> &mut [f64] {
        &mut self.density
    }

    pub(crate) fn with_marked(mut self, marked: Vec<usize>) -> Self {
        self.marked = marked;
        self
    }
}

/// An `m × n` periodic grid of points in `R^4` carrying a 2-density.
///
/// Point `(i, j)` sits at row `i`, column `j`. Rows run along the first
/// torus angle sampled by `j`; a column `j` traced over all rows is a
/// meridian loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTorusGrid {
    rows: usize,
    cols: usize,
    coords: Vec<f64>,
    density: Vec<f64>,
    marked_columns: Vec<usize>,
}

impl DiscreteTorusGrid {
    pub const DIM: usize = 4;

    pub fn new(
        rows: usize,
        cols: usize,
        grid: &[Vec<f64>],
        density: Vec<f64>,
        marked_columns: Vec<usize>,
    ) -> Result<Self> {
        if rows < MIN_RESOLUTION || cols < MIN_RESOLUTION {
            return Err(FlagError::TooCoarse {
                requested: rows.min(cols),
                reason: format!("torus grids need at least {MIN_RESOLUTION} samples per direction"),
            });
        }
        if grid.len() != rows * cols {
            return Err(FlagError::LengthMismatch { left: rows * cols, right: grid.len() });
        }
        if density.len() != rows * cols {
            return Err(FlagError::LengthMismatch { left: rows * cols, right: density.len() });
        }
        quadrature::constant_sign(&density)?;
        check_marks(&marked_columns, cols, "marked_columns")?;
        let coords = flatten(Self::DIM, grid)?;
        Ok(Self { rows, cols, coords, density, marked_columns })
    }

    /// Product torus `(r1 cos α, r1 sin α, r2 cos β, r2 sin β)` with `α` along
    /// columns and `β` along rows.
    pub fn product(r1: f64, r2: f64, rows: usize, cols: usize, density: f64, marked_columns: Vec<usize>) -> Result<Self> {
        Self::sample(rows, cols, |a, b| [r1 * a.cos(), r1 * a.sin(), r2 * b.cos(), r2 * b.sin()], |_, _| density, marked_columns)
    }

    /// Grid sampled from a parametrization `(α, β) ↦ R^4`, `α` along columns.
    pub fn sample(
        rows: usize,
        cols: usize,
        param: impl Fn(f64, f64) -> [f64; 4],
        density: impl Fn(f64, f64) -> f64,
        marked_columns: Vec<usize>,
    ) -> Result<Self> {
        let ha = quadrature::spacing(cols);
        let hb = quadrature::spacing(rows);
        let mut grid = Vec::with_capacity(rows * cols);
        let mut dens = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let (a, b) = (j as f64 * ha, i as f64 * hb);
                grid.push(param(a, b).to_vec());
                dens.push(density(a, b));
            }
        }
        Self::new(rows, cols, &grid, dens, marked_columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn point(&self, i: usize, j: usize) -> &[f64] {
        let k = (i % self.rows) * self.cols + (j % self.cols);
        &self.coords[k * Self::DIM..(k + 1) * Self::DIM]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn marked_columns(&self) -> &[usize] {
        &self.marked_columns
    }

    /// Cell area in parameter space, `(2π/rows)(2π/cols)`.
    pub fn cell_measure(&self) -> f64 {
        quadrature::spacing(self.rows) * quadrature::spacing(self.cols)
    }

    /// Row `i` traced over all columns.
    pub fn row_loop(&self, i: usize) -> Vec<f64> {
        (0..self.cols).flat_map(|j| self.point(i, j).to_vec()).collect()
    }

    /// Column `j` traced over all rows (a marked meridian when `j` is marked).
    pub fn column_loop(&self, j: usize) -> Vec<f64> {
        (0..self.rows).flat_map(|i| self.point(i, j).to_vec()).collect()
    }

    pub fn min_edge_length(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.min(dist(self.point(i, j), self.point(i, j + 1)));
                m = m.min(dist(self.point(i, j), self.point(i + 1, j)));
            }
        }
        m
    }

    /// Masses of the bands between consecutive marked columns.
    pub fn band_masses(&self) -> Vec<f64> {
        let hb = quadrature::spacing(self.rows);
        let column_mass: Vec<f64> = (0..self.cols)
            .map(|j| hb * (0..self.rows).map(|i| self.density[i * self.cols + j]).sum::<f64>())
            .collect();
        quadrature::arc_masses(&column_mass, quadrature::spacing(self.cols), &self.marked_columns)
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_measure() * self.density.iter().sum::<f64>()
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }
}

/// The geometric levels of a flag.
#[derive(Debug, Clone, PartialEq)]
pub enum FlagLevels {
    Points(WeightedPointSet),
    Loop(DiscreteLoop),
    /// Points sitting on marked loop vertices; `anchors[p]` is the vertex of point `p`.
    PointsInLoop {
        points: WeightedPointSet,
        curve: DiscreteLoop,
        anchors: Vec<usize>,
    },
    Torus(DiscreteTorusGrid),
    /// Marked meridian loops (one density row-vector per marked column) inside a torus.
    MeridiansInTorus {
        meridian_density: Vec<Vec<f64>>,
        torus: DiscreteTorusGrid,
    },
}

/// Per-level masses of the connected components of `N_i \ N_{i-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSignature {
    pub levels: Vec<Vec<f64>>,
}

impl MassSignature {
    pub fn new(levels: Vec<Vec<f64>>) -> Self {
        Self { levels }
    }

    pub fn level_totals(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.iter().sum()).collect()
    }
}

/// A validated weighted nonlinear flag.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFlag {
    dim: usize,
    nesting_tol: f64,
    levels: FlagLevels,
}

impl WeightedFlag {
    pub fn points(set: WeightedPointSet) -> Self {
        Self { dim: set.dim(), nesting_tol: 0.0, levels: FlagLevels::Points(set) }
    }

    pub fn single_loop(curve: DiscreteLoop) -> Self {
        Self { dim: curve.dim(), nesting_tol: 0.0, levels: FlagLevels::Loop(curve) }
    }

    pub fn torus(torus: DiscreteTorusGrid) -> Self {
        Self { dim: DiscreteTorusGrid::DIM, nesting_tol: 0.0, levels: FlagLevels::Torus(torus) }
    }

    /// Nest weighted points on a loop: each point is snapped to its nearest
    /// vertex, which becomes a marked vertex of the loop.
    pub fn points_in_loop(points: WeightedPointSet, curve: DiscreteLoop, nesting_tol: f64) -> Result<Self> {
        if !(nesting_tol >= 0.0) {
            return Err(FlagError::InvalidInput("nesting_tol must be nonnegative".into()));
        }
        if points.dim() != curve.dim() {
            return Err(FlagError::DimensionMismatch { expected: curve.dim(), got: points.dim() });
        }
        let mut anchors = Vec::with_capacity(points.len());
        for p in 0..points.len() {
            let x = points.position(p);
            let (best, d) = (0..curve.len())
                .map(|i| (i, dist(x, curve.vertex(i))))
                .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            if d > nesting_tol {
                return Err(FlagError::NestingViolation { point: p, distance: d, tol: nesting_tol });
            }
            anchors.push(best);
        }
        let mut marked = anchors.clone();
        marked.sort_unstable();
        if marked.windows(2).any(|w| w[0] == w[1]) {
            return Err(FlagError::DegenerateGeometry("two points snap to the same vertex".into()));
        }
        if !curve.marked().is_empty() && curve.marked() != marked.as_slice() {
            return Err(FlagError::InvalidInput(format!(
                "loop marked indices {:?} disagree with snapped point locations {:?}",
                curve.marked(),
                marked
            )));
        }
        let mut points = points;
        for (p, &a) in anchors.iter().enumerate() {
            let d = points.dim();
            points.coords_mut()[p * d..(p + 1) * d].copy_from_slice(curve.vertex(a));
        }
        let curve = curve.with_marked(marked);
        Ok(Self { dim: points.dim(), nesting_tol, levels: FlagLevels::PointsInLoop { points, curve, anchors } })
    }

    /// Nest weighted meridian loops (the marked columns) inside a torus.
    pub fn meridians_in_torus(meridian_density: Vec<Vec<f64>>, torus: DiscreteTorusGrid) -> Result<Self> {
        if meridian_density.len() != torus.marked_columns().len() {
            return Err(FlagError::LengthMismatch {
                left: torus.marked_columns().len(),
                right: meridian_density.len(),
            });
        }
        for d in &meridian_density {
            if d.len() != torus.rows() {
                return Err(FlagError::LengthMismatch { left: torus.rows(), right: d.len() });
            }
            quadrature::constant_sign(d)?;
        }
        Ok(Self { dim: DiscreteTorusGrid::DIM, nesting_tol: 0.0, levels: FlagLevels::MeridiansInTorus { meridian_density, torus } })
    }

    pub fn with_nesting_tol(mut self, tol: f64) -> Self {
        self.nesting_tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nesting_tol(&self) -> f64 {
        self.nesting_tol
    }

    pub fn levels(&self) -> &FlagLevels {
        &self.levels
    }

    /// The top-level loop, if the flag has one.
    pub fn curve(&self) -> Option<&DiscreteLoop> {
        match &self.levels {
            FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn point_set(&self) -> Option<&WeightedPointSet> {
        match &self.levels {
            FlagLevels::Points(p) | FlagLevels::PointsInLoop { points: p, .. } => Some(p),
            _ => None,
        }
    }

    /// Loop vertex carrying each point (empty unless points sit on a loop).
    pub fn anchors(&self) -> &[usize] {
        match &self.levels {
            FlagLevels::PointsInLoop { anchors, .. } => anchors,
            _ => &[],
        }
    }

    pub fn torus_grid(&self) -> Option<&DiscreteTorusGrid> {
        match &self.levels {
            FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => Some(t),
            _ => None,
        }
    }

    /// Dimensions of the nested submanifolds, strictly increasing.
    pub fn level_dimensions(&self) -> Vec<usize> {
        match &self.levels {
            FlagLevels::Points(_) => vec![0],
            FlagLevels::Loop(_) => vec![1],
            FlagLevels::PointsInLoop { .. } => vec![0, 1],
            FlagLevels::Torus(_) => vec![2],
            FlagLevels::MeridiansInTorus { .. } => vec![1, 2],
        }
    }

    /// All positions (points first, then loop vertices or grid points), flattened.
    pub fn positions(&self) -> Vec<f64> {
        match &self.levels {
            FlagLevels::Points(p) => p.coords().to_vec(),
            FlagLevels::Loop(c) => c.coords().to_vec(),
            FlagLevels::PointsInLoop { points, curve, .. } => {
                let mut v = points.coords().to_vec();
                v.extend_from_slice(curve.coords());
                v
            }
            FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => t.coords().to_vec(),
        }
    }

    /// Replace every position, keeping all masses. No revalidation is done:
    /// this is how transported and perturbed flags are produced.
    pub fn with_positions(&self, flat: &[f64]) -> Self {
        let mut out = self.clone();
        match &mut out.levels {
            FlagLevels::Points(p) => p.coords_mut().copy_from_slice(flat),
            FlagLevels::Loop(c) => c.coords_mut().copy_from_slice(flat),
            FlagLevels::PointsInLoop { points, curve, .. } => {
                let k = points.coords().len();
                points.coords_mut().copy_from_slice(&flat[..k]);
                curve.coords_mut().copy_from_slice(&flat[k..]);
            }
            FlagLevels::Torus(t) | FlagLevels::MeridiansInTorus { torus: t, .. } => {
                t.coords_mut().copy_from_slice(flat)
            }
        }
        out
    }

    /// Move point `p` by `delta` without touching the loop (for monitoring tests).
    pub fn with_point_displaced(&self, p: usize, delta: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        let dim = self.dim;
        match &mut out.levels {
            FlagLevels::Points(set) | FlagLevels::PointsInLoop { points: set, .. } => {
                if p >= set.len() {
                    return Err(FlagError::InvalidInput(format!("no point {p}")));
                }
                if delta.len() != dim {
                    return Err(FlagError::DimensionMismatch { expected: dim, got: delta.len() });
                }
                for (c, d) in set.coords_mut()[p * dim..(p + 1) * dim].iter_mut().zip(delta) {
                    *c += d;
                }
                Ok(out)
            }
            _ => Err(FlagError::Unsupported("flag has no point level".into())),
        }
    }

    pub(crate) fn curve_mut(&mut self) -> Option<&mut DiscreteLoop> {
        match &mut self.levels {
            FlagLevels::Loop(c) | FlagLevels::PointsInLoop { curve: c, .. } => Some(c),
            _ => None,
        }
    }

    pub(crate) fn point_set_mut(&mut self) -> Option<&mut WeightedPointSet> {
        match &mut self.levels {
            FlagLevels::Points(p) | FlagLevels::PointsInLoop { points: p, .. } => Some(p),
            _ => None,
        }
    }
}

/// Largest distance between a lower-level point and the vertex carrying it.
pub fn nesting_residual(flag: &WeightedFlag) -> f64 {
    match flag.levels() {
        FlagLevels::PointsInLoop { points, curve, anchors } => anchors
            .iter()
            .enumerate()
            .map(|(p, &a)| dist(points.position(p), curve.vertex(a)))
            .fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// Masses of the connected components of each level minus the level below.
pub fn component_masses(flag: &WeightedFlag) -> MassSignature {
    let levels = match flag.levels() {
        FlagLevels::Points(p) => vec![p.weights().to_vec()],
        FlagLevels::Loop(c) => vec![c.arc_masses()],
        FlagLevels::PointsInLoop { points, curve, anchors } => {
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by_key(|&p| anchors[p]);
            let weights = order.iter().map(|&p| points.weights()[p]).collect();
            vec![weights, curve.arc_masses()]
        }
        FlagLevels::Torus(t) => vec![t.band_masses()],
        FlagLevels::MeridiansInTorus { meridian_density, torus } => {
            let hb = quadrature::spacing(torus.rows());
            let meridians = meridian_density.iter().map(|d| quadrature::periodic_sum(d, hb)).collect();
            vec![meridians, torus.band_masses()]
        }
    };
    MassSignature::new(levels)
}

// ---------------------------------------------------------------------------
// Resampling

/// Periodic Catmull-Rom spline through the loop vertices, parameter `t ∈ [0, n)`.
struct LoopSpline<'a> {
    curve: &'a DiscreteLoop,
}

impl LoopSpline<'_> {
    fn segment(&self, t: f64) -> (usize, f64) {
        let n = self.curve.len();
        let t = t.rem_euclid(n as f64);
        let k = (t.floor() as usize).min(n - 1);
        (k, t - k as f64)
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.curve.len();
        let (k, s) = self.segment(t);
        let p0 = self.curve.vertex(k + n - 1);
        let p1 = self.curve.vertex(k);
        let p2 = self.curve.vertex(k + 1);
        let p3 = self.curve.vertex(k + 2);
        let (s2, s3) = (s * s, s * s * s);
        (0..self.curve.dim())
            .map(|d| {
                0.5 * (2.0 * p1[d]
                    + (p2[d] - p0[d]) * s
                    + (2.0 * p0[d] - 5.0 * p1[d] + 4.0 * p2[d] - p3[d]) * s2
                    + (3.0 * p1[d] - p0[d] - 3.0 * p2[d] + p3[d]) * s3)
            })
            .collect()
    }

    fn speed(&self, t: f64) -> f64 {
        let n = self.curve.len();
        let (k, s) = self.segment(t);
        let p0 = self.curve.vertex(k + n - 1);
        let p1 = self.curve.vertex(k);
        let p2 = self.curve.vertex(k + 1);
        let p3 = self.curve.vertex(k + 2);
        (0..self.curve.dim())
            .map(|d| {
                let v = 0.5
                    * ((p2[d] - p0[d])
                        + 2.0 * (2.0 * p0[d] - 5.0 * p1[d] + 4.0 * p2[d] - p3[d]) * s
                        + 3.0 * (3.0 * p1[d] - p0[d] - 3.0 * p2[d] + p3[d]) * s * s);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }
}

const ARCLENGTH_SUBSTEPS: usize = 32;

/// Resample a loop to `n` vertices spaced uniformly in arclength.
///
/// Marked vertices keep their exact positions and move to the nearest new
/// vertex; the density is transported and then corrected so that every arc
/// mass (or the total mass of an unmarked loop) is unchanged.
pub fn resample_loop(curve: &DiscreteLoop, n: usize) -> Result<DiscreteLoop> {
    let old_n = curve.len();
    let marks = curve.marked();
    if n < MIN_RESOLUTION || n < marks.len() {
        return Err(FlagError::TooCoarse {
            requested: n,
            reason: format!("need at least max({MIN_RESOLUTION}, {}) vertices", marks.len()),
        });
    }
    let spline = LoopSpline { curve };

    // Cumulative arclength at fine parameter samples (Simpson per substep).
    let fine = old_n * ARCLENGTH_SUBSTEPS;
    let dt = 1.0 / ARCLENGTH_SUBSTEPS as f64;
    let mut arclen = Vec::with_capacity(fine + 1);
    arclen.push(0.0);
    let mut acc = 0.0;
    for k in 0..fine {
        let t0 = k as f64 * dt;
        acc += dt / 6.0 * (spline.speed(t0) + 4.0 * spline.speed(t0 + 0.5 * dt) + spline.speed(t0 + dt));
        arclen.push(acc);
    }
    let total_len = acc;
    let param_at = |s: f64| -> f64 {
        let k = arclen.partition_point(|&a| a <= s).clamp(1, fine);
        let (a0, a1) = (arclen[k - 1], arclen[k]);
        let frac = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        (k as f64 - 1.0 + frac) * dt
    };

    // Old parameter of each new vertex.
    let mut params: Vec<f64> = (0..n).map(|j| param_at(j as f64 * total_len / n as f64)).collect();
    let mut new_marks = Vec::with_capacity(marks.len());
    for &m in marks {
        let s = arclen[m * ARCLENGTH_SUBSTEPS];
        let j = ((s / total_len * n as f64).round() as usize) % n;
        new_marks.push(j);
        // A mark near the end of the loop may round onto vertex 0.
        params[j] = if j == 0 && 2 * m > old_n { m as f64 - old_n as f64 } else { m as f64 };
    }
    let mut sorted = new_marks.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(FlagError::TooCoarse {
            requested: n,
            reason: "two marked vertices collapse onto one new vertex".into(),
        });
    }
    let mut coords = Vec::with_capacity(n * curve.dim());
    for (j, &t) in params.iter().enumerate() {
        if let Some(k) = new_marks.iter().position(|&q| q == j) {
            coords.extend_from_slice(curve.vertex(marks[k]));
        } else {
            coords.extend(spline.eval(t));
        }
    }

    // Transport the density: derivative of the old cumulative mass along the new parameter.
    let h_old = curve.spacing();
    let h_new = quadrature::spacing(n);
    let cum = quadrature::cumulative(curve.density(), h_old);
    let total_mass = cum[old_n];
    let mass_at = |t: f64| -> f64 {
        let wraps = (t / old_n as f64).floor();
        let tt = t - wraps * old_n as f64;
        let k = (tt.floor() as usize).min(old_n - 1);
        let s = tt - k as f64;
        let (d0, d1) = (curve.density()[k], curve.density()[(k + 1) % old_n]);
        wraps * total_mass + cum[k] + h_old * (d0 * s + 0.5 * (d1 - d0) * s * s)
    };
    let unwrap = |j: isize| -> f64 {
        let nn = n as isize;
        let w = j.div_euclid(nn);
        params[j.rem_euclid(nn) as usize] + (w * old_n as isize) as f64
    };
    let mut density: Vec<f64> = (0..n as isize)
        .map(|j| {
            let tp = unwrap(j + 1);
            let tm = unwrap(j - 1);
            (mass_at(tp) - mass_at(tm)) / (2.0 * h_new)
        })
        .collect();

    let targets_by_old = curve.arc_masses();
    let (marked_sorted, targets) = if marks.is_empty() {
        (Vec::new(), vec![curve.total_mass()])
    } else {
        // Old arc k starts at marks[k]; new arcs are ordered by sorted new index.
        let mut pairs: Vec<(usize, f64)> = new_marks.iter().copied().zip(targets_by_old).collect();
        pairs.sort_by_key(|p| p.0);
        (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect::<Vec<_>>())
    };
    quadrature::match_arc_masses(&mut density, h_new, &marked_sorted, &targets)?;
    DiscreteLoop::from_flat(curve.dim(), coords, density, marked_sorted)
}

// ---------------------------------------------------------------------------
// JSON schema

/// One level of the JSON flag document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LevelDoc {
    Points {
        positions: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Loop {
        vertices: Vec<Vec<f64>>,
        density: Vec<f64>,
        #[serde(default)]
        marked: Vec<usize>,
    },
    Meridians {
        columns: Vec<usize>,
        density: Vec<Vec<f64>>,
    },
    Torus {
        rows: usize,
        cols: usize,
        grid: Vec<Vec<f64>>,
        density: Vec<f64>,
        #[serde(default)]
        marked_columns: Vec<usize>,
    },
}

/// Raw flag data as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagDoc {
    pub dimension: usize,
    pub nesting_tol: f64,
    pub levels: Vec<LevelDoc>,
}

impl FlagDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FlagError::InvalidInput(format!("flag JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("flag documents always serialize")
    }
}

/// Validate raw level data into a flag.
pub fn build_flag(doc: &FlagDoc) -> Result<WeightedFlag> {
    let dim = doc.dimension;
    check_dim(dim)?;
    if !(doc.nesting_tol >= 0.0) {
        return Err(FlagError::InvalidInput("nesting_tol must be nonnegative".into()));
    }
    let flag = match doc.levels.as_slice() {
        [LevelDoc::Points { positions, weights }] => {
            WeightedFlag::points(WeightedPointSet::new(dim, positions, weights.clone())?)
        }
        [LevelDoc::Loop { vertices, density, marked }] => {
            WeightedFlag::single_loop(DiscreteLoop::new(dim, vertices, density.clone(), marked.clone())?)
        }
        [LevelDoc::Points { positions, weights }, LevelDoc::Loop { vertices, density, marked }] => {
            let points = WeightedPointSet::new(dim, positions, weights.clone())?;
            let curve = DiscreteLoop::new(dim, vertices, density.clone(), marked.clone())?;
            WeightedFlag::points_in_loop(points, curve, doc.nesting_tol)?
        }
        [LevelDoc::Torus { rows, cols, grid, density, marked_columns }] => {
            check_torus_dim(dim)?;
            WeightedFlag::torus(DiscreteTorusGrid::new(*rows, *cols, grid, density.clone(), marked_columns.clone())?)
        }
        [LevelDoc::Meridians { columns, density: md }, LevelDoc::Torus { rows, cols, grid, density, marked_columns }] => {
            check_torus_dim(dim)?;
            let marked = if marked_columns.is_empty() { columns.clone() } else { marked_columns.clone() };
            if &marked != columns {
                return Err(FlagError::InvalidInput(format!(
                    "meridian columns {columns:?} are not the marked columns {marked:?}"
                )));
            }
            let torus = DiscreteTorusGrid::new(*rows, *cols, grid, density.clone(), marked)?;
            WeightedFlag::meridians_in_torus(md.clone(), torus)?
        }
        _ => {
            return Err(FlagError::Unsupported(
                "levels must be [points], [loop], [points, loop], [torus] or [meridians, torus]".into(),
            ))
        }
    };
    Ok(flag.with_nesting_tol(doc.nesting_tol))
}

fn check_torus_dim(dim: usize) -> Result<()> {
    if dim != DiscreteTorusGrid::DIM {
        return Err(FlagError::DimensionMismatch { expected: DiscreteTorusGrid::DIM, got: dim });
    }
    Ok(())
}

fn torus_doc(t: &DiscreteTorusGrid) -> LevelDoc {
    LevelDoc::Torus {
        rows: t.rows(),
        cols: t.cols(),
        grid: unflatten(DiscreteTorusGrid::DIM, t.coords()),
        density: t.density().to_vec(),
        marked_columns: t.marked_columns().to_vec(),
    }
}

fn loop_doc(c: &DiscreteLoop) -> LevelDoc {
    LevelDoc::Loop {
        vertices: unflatten(c.dim(), c.coords()),
        density: c.density().to_vec(),
        marked: c.marked().to_vec(),
    }
}

fn points_doc(p: &WeightedPointSet) -> LevelDoc {
    LevelDoc::Points { positions: unflatten(p.dim(), p.coords()), weights: p.weights().to_vec() }
}

impl WeightedFlag {
    pub fn to_doc(&self) -> FlagDoc {
        let levels = match &self.levels {
            FlagLevels::Points(p) => vec![points_doc(p)],
            FlagLevels::Loop(c) => vec![loop_doc(c)],
            FlagLevels::PointsInLoop { points, curve, .. } => vec![points_doc(points), loop_doc(curve)],
            FlagLevels::Torus(t) => vec![torus_doc(t)],
            FlagLevels::MeridiansInTorus { meridian_density, torus } => vec![
                LevelDoc::Meridians { columns: torus.marked_columns().to_vec(), density: meridian_density.clone() },
                torus_doc(torus),
            ],
        };
        FlagDoc { dimension: self.dim, nesting_tol: self.nesting_tol, levels }
    }

    pub fn to_json(&self) -> String {
        self.to_doc().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        build_flag(&FlagDoc::from_json(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn circle_flag(weights: Vec<f64>, marks: [usize; 3], n: usize) -> WeightedFlag {
        let curve = DiscreteLoop::circle(2, n, 1.0, |_| 1.0, vec![]).unwrap();
        let positions: Vec<Vec<f64>> = marks.iter().map(|&m| curve.vertex(m).to_vec()).collect();
        let pts = WeightedPointSet::new(2, &positions, weights).unwrap();
        WeightedFlag::points_in_loop(pts, curve, 1e-9).unwrap()
    }

    #[test]
    fn builds_three_points_on_circle() {
        let flag = circle_flag(vec![1.0, 2.0, 3.0], [0, 21, 42], 64);
        assert_eq!(flag.curve().unwrap().marked(), &[0, 21, 42]);
        assert_eq!(flag.level_dimensions(), vec![0, 1]);
        assert_eq!(nesting_residual(&flag), 0.0);
    }

    #[test]
    fn displaced_point_is_nesting_violation() {
        let curve = DiscreteLoop::circle(2, 64, 1.0, |_| 1.0, vec![]).unwrap();
        let mut positions: Vec<Vec<f64>> = [0, 21, 42].iter().map(|&m| curve.vertex(m).to_vec()).collect();
        positions[1][0] += 0.5;
        let pts = WeightedPointSet::new(2, &positions, vec![1.0, 2.0, 3.0]).unwrap();
        let err = WeightedFlag::points_in_loop(pts, curve, 1e-9).unwrap_err();
        assert!(matches!(err, FlagError::NestingViolation { point: 1, .. }));
    }

    #[test]
    fn zero_density_is_sign_error() {
        let mut dens = vec![1.0; 16];
        dens[5] = 0.0;
        let err = DiscreteLoop::sample(2, 16, |t| vec![t.cos(), t.sin()], |_| 1.0, vec![])
            .and_then(|c| DiscreteLoop::new(2, &unflatten(2, c.coords()), dens, vec![]))
            .unwrap_err();
        assert!(matches!(err, FlagError::SignError(_)));
    }

    #[test]
    fn repeated_vertex_is_degenerate() {
        let mut v: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64).cos(), (i as f64).sin()]).collect();
        v[3] = v[2].clone();
        let err = DiscreteLoop::new(2, &v, vec![1.0; 8], vec![]).unwrap_err();
        assert!(matches!(err, FlagError::DegenerateGeometry(_)));
    }

    #[test]
    fn residual_reports_displacement() {
        let flag = circle_flag(vec![1.0, 2.0, 3.0], [0, 21, 42], 64);
        let moved = flag.with_point_displaced(1, &[1e-7, 0.0]).unwrap();
        assert!((nesting_residual(&moved) - 1e-7).abs() < 1e-12);
    }

    #[test]
    fn masses_of_equally_spaced_points() {
        let flag = circle_flag(vec![1.0, 2.0, 3.0], [0, 20, 40], 60);
        let sig = component_masses(&flag);
        assert_eq!(sig.levels[0], vec![1.0, 2.0, 3.0]);
        for w in &sig.levels[1] {
            assert!((w - TAU / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_reported_in_marked_order() {
        let curve = DiscreteLoop::circle(2, 64, 1.0, |_| 1.0, vec![]).unwrap();
        let positions: Vec<Vec<f64>> = [42, 0, 21].iter().map(|&m| curve.vertex(m).to_vec()).collect();
        let pts = WeightedPointSet::new(2, &positions, vec![3.0, 1.0, 2.0]).unwrap();
        let flag = WeightedFlag::points_in_loop(pts, curve, 1e-9).unwrap();
        assert_eq!(component_masses(&flag).levels[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn unmarked_loop_has_one_arc() {
        let flag = WeightedFlag::single_loop(DiscreteLoop::circle(2, 64, 1.0, |_| 1.0, vec![]).unwrap());
        let sig = component_masses(&flag);
        assert_eq!(sig.levels.len(), 1);
        assert!((sig.levels[0][0] - TAU).abs() < 1e-12);
    }

    #[test]
    fn sine_modulated_arcs_match_closed_form() {
        // ∫ (1 + 0.5 sin θ) dθ = θ - 0.5 cos θ
        let c = DiscreteLoop::circle(2, 256, 1.0, |t| 1.0 + 0.5 * t.sin(), vec![0, 128]).unwrap();
        let arcs = c.arc_masses();
        assert!((arcs[0] - (PI + 1.0)).abs() < 1e-3);
        assert!((arcs[1] - (PI - 1.0)).abs() < 1e-3);
    }

    #[test]
    fn torus_bands_and_meridians() {
        let t = DiscreteTorusGrid::product(1.0, 0.5, 16, 16, 1.0, vec![0, 8]).unwrap();
        let bands = t.band_masses();
        assert_eq!(bands.len(), 2);
        for b in &bands {
            assert!((b - 2.0 * PI * PI).abs() < 1e-12);
        }
        let flag = WeightedFlag::meridians_in_torus(vec![vec![1.0; 16], vec![2.0; 16]], t).unwrap();
        let sig = component_masses(&flag);
        assert!((sig.levels[0][0] - TAU).abs() < 1e-12);
        assert!((sig.levels[0][1] - 2.0 * TAU).abs() < 1e-12);
    }

    #[test]
    fn resample_rejects_too_few_vertices() {
        let c = DiscreteLoop::circle(2, 64, 1.0, |_| 1.0, vec![0, 20, 40]).unwrap();
        assert!(matches!(resample_loop(&c, 2), Err(FlagError::TooCoarse { .. })));
    }

    #[test]
    fn resample_circle_preserves_total_mass() {
        let c = DiscreteLoop::circle(2, 64, 1.0, |t| 1.0 + 0.2 * t.cos(), vec![]).unwrap();
        let r = resample_loop(&c, 128).unwrap();
        assert_eq!(r.len(), 128);
        assert!((r.total_mass() - c.total_mass()).abs() < 1e-10 * c.total_mass());
        for i in 0..128 {
            let rad = (r.vertex(i)[0].powi(2) + r.vertex(i)[1].powi(2)).sqrt();
            assert!((rad - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn resample_ellipse_preserves_arc_masses() {
        let c = DiscreteLoop::sample(2, 96, |t| vec![2.0 * t.cos(), t.sin()], |t| 1.0 + 0.3 * t.sin(), vec![0, 30, 61])
            .unwrap();
        let before = c.arc_masses();
        let r = resample_loop(&c, 200).unwrap();
        let after = r.arc_masses();
        assert_eq!(r.marked().len(), 3);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-10 * a.abs(), "{a} vs {b}");
        }
        for (&m_old, &m_new) in c.marked().iter().zip(r.marked()) {
            assert_eq!(c.vertex(m_old), r.vertex(m_new));
        }
    }

    #[test]
    fn json_shape_matches_schema() {
        let flag = circle_flag(vec![1.0, 2.0, 3.0], [0, 21, 42], 64);
        let text = flag.to_json();
        assert!(text.starts_with(r#"{"dimension":2,"nesting_tol":1e-9,"levels":[{"kind":"points","positions":"#));
        assert!(text.contains(r#"{"kind":"loop","vertices":"#));
        let back = WeightedFlag::from_json(&text).unwrap();
        assert_eq!(back, flag);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_unsupported_level_stack() {
        let doc = FlagDoc { dimension: 2, nesting_tol: 0.0, levels: vec![] };
        assert!(matches!(build_flag(&doc), Err(FlagError::Unsupported(_))));
    }
}
