//! Observation grids on `[0, 1]`, paths sampled on them, and the piecewise
//! linear interpolation operator with its exact sup-norm functionals.
//!
//! Interpolated paths are constant left of the first node and right of the
//! last node, and affine in between. On `(t_{j-1}, t_j]` the value is the
//! convex combination with weight `(t_j - t) / (t_j - t_{j-1})` on the left
//! node. Node values are reproduced exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing observation points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid has no points".into()));
        }
        for (i, &p) in points.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidGrid(format!("point {i} = {p} is outside [0, 1]")));
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing (index {} = {}, index {} = {})",
                i,
                points[i],
                i + 1,
                points[i + 1]
            )));
        }
        Ok(Self { points })
    }

    /// `m + 1` equally spaced points `0, 1/m, ..., 1`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("uniform grid needs at least one interval".into()));
        }
        let points = (0..=m).map(|i| i as f64 / m as f64).collect();
        Self::new(points)
    }

    /// The coarsest uniform grid `{0, 1/m, ..., 1}` whose mesh does not exceed `delta`.
    pub fn with_mesh(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidGrid(format!("mesh {delta} must be positive")));
        }
        let m = (1.0 / delta).ceil().max(1.0) as usize;
        Self::uniform(m)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maximal spacing, with the interval padded by `t_0 = 0` and `t_{j+1} = 1`.
    pub fn mesh(&self) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(first.max(1.0 - last), f64::max)
    }

    /// Interpolation stencil at `t`.
    pub fn stencil(&self, t: f64) -> Stencil {
        let pts = &self.points;
        let last = pts.len() - 1;
        if t <= pts[0] {
            return Stencil::Node(0);
        }
        if t > pts[last] {
            return Stencil::Node(last);
        }
        // first j with t_j >= t; j >= 1 here
        let j = pts.partition_point(|&p| p < t);
        if pts[j] == t {
            return Stencil::Node(j);
        }
        let frac = (t - pts[j - 1]) / (pts[j] - pts[j - 1]);
        Stencil::Segment { lo: j - 1, frac }
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Grid::new(points)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(grid: Grid) -> Self {
        grid.points
    }
}

/// Where a location falls relative to the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil {
    /// Exactly a node, or in a constant extension region.
    Node(usize),
    /// Strictly inside `(t_lo, t_{lo+1})`; `frac` is the weight on the right node.
    Segment { lo: usize, frac: f64 },
}

impl Stencil {
    pub fn apply(&self, values: &[f64]) -> f64 {
        match *self {
            Stencil::Node(j) => values[j],
            Stencil::Segment { lo, frac } => {
                let (a, b) = (values[lo], values[lo + 1]);
                a + frac * (b - a)
            }
        }
    }

    /// `(index, weight)` pairs; weights sum to one.
    pub fn weights(&self) -> [(usize, f64); 2] {
        match *self {
            Stencil::Node(j) => [(j, 1.0), (j, 0.0)],
            Stencil::Segment { lo, frac } => [(lo, 1.0 - frac), (lo + 1, frac)],
        }
    }
}

/// One path's values at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "path value {} at t = {}",
                values[i],
                grid.points()[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interpolate(&self) -> PiecewiseLinearPath {
        PiecewiseLinearPath {
            grid: Arc::clone(&self.grid),
            values: self.values.clone(),
        }
    }

    pub fn into_interpolated(self) -> PiecewiseLinearPath {
        PiecewiseLinearPath {
            grid: self.grid,
            values: self.values,
        }
    }
}

/// The interpolated path, evaluable anywhere on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PiecewiseLinearPath {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        SampledPath::new(grid, values).map(SampledPath::into_interpolated)
    }

    /// A path equal to `level` everywhere.
    pub fn constant(level: f64) -> Self {
        Self {
            grid: Arc::new(Grid { points: vec![0.5] }),
            values: vec![level],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.grid.stencil(t).apply(&self.values)
    }

    /// Reads the path off `grid`.
    pub fn sample_on(&self, grid: &Arc<Grid>) -> SampledPath {
        let values = grid.points().iter().map(|&t| self.eval(t)).collect();
        SampledPath {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact `sup |z1 - z2|` over `[0, 1]`. The difference is piecewise linear
    /// with breakpoints in the union of both node sets, constant outside it.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            return self
                .values
                .iter()
                .zip(&other.values)
                .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        }
        if other.grid.len() == 1 {
            let c = other.values[0];
            return self.values.iter().fold(0.0, |m, a| m.max((a - c).abs()));
        }
        if self.grid.len() == 1 {
            return other.sup_distance(self);
        }
        let (p, q) = (self.grid.points(), other.grid.points());
        let (mut i, mut j) = (0, 0);
        let mut best = 0.0_f64;
        while i < p.len() || j < q.len() {
            let t = match (p.get(i), q.get(j)) {
                (Some(&a), Some(&b)) if a == b => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (_, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            best = best.max((self.eval(t) - other.eval(t)).abs());
        }
        best
    }

    /// Exact modulus of continuity `sup{|z(x) - z(y)| : |x - y| <= delta}`.
    ///
    /// `(x, y) -> z(y) - z(x)` is linear on each cell of the subdivision of the
    /// strip `0 <= y - x <= delta` cut by the breakpoint lines, so its extrema sit
    /// at cell vertices: breakpoint pairs, and pairs `(b, b + delta)` or
    /// `(b - delta, b)`. Every such pair lies in a window `[x, x + delta]` starting
    /// at a breakpoint or at `b - delta`; the oscillation over such a window is
    /// read from a range-extrema table.
    pub fn modulus_of_continuity(&self, delta: f64) -> f64 {
        if !(delta > 0.0) {
            return 0.0;
        }
        let mut knots = Vec::with_capacity(self.values.len() + 2);
        if self.grid.points()[0] > 0.0 {
            knots.push(0.0);
        }
        knots.extend_from_slice(self.grid.points());
        if *knots.last().unwrap() < 1.0 {
            knots.push(1.0);
        }
        let vals: Vec<f64> = knots.iter().map(|&t| self.eval(t)).collect();
        if delta >= 1.0 {
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            return hi - lo;
        }
        let table = RangeExtrema::new(&vals);

        let mut best = 0.0_f64;
        let mut window = |x: f64| {
            let end = (x + delta).min(1.0);
            let (mut lo, mut hi) = {
                let (a, b) = (self.eval(x), self.eval(end));
                (a.min(b), a.max(b))
            };
            let first = knots.partition_point(|&b| b < x);
            let past = knots.partition_point(|&b| b <= end);
            if first < past {
                let (mn, mx) = table.query(first, past - 1);
                lo = lo.min(mn);
                hi = hi.max(mx);
            }
            best = best.max(hi - lo);
        };
        for &b in &knots {
            window(b);
            if b - delta >= 0.0 {
                window(b - delta);
            }
        }
        best
    }
}

/// Sparse table answering range min/max in O(1).
struct RangeExtrema {
    min: Vec<Vec<f64>>,
    max: Vec<Vec<f64>>,
}

impl RangeExtrema {
    fn new(values: &[f64]) -> Self {
        let mut min = vec![values.to_vec()];
        let mut max = vec![values.to_vec()];
        let mut span = 1;
        while 2 * span <= values.len() {
            let (pmin, pmax) = (min.last().unwrap(), max.last().unwrap());
            let len = values.len() + 1 - 2 * span;
            let nmin = (0..len).map(|i| pmin[i].min(pmin[i + span])).collect();
            let nmax = (0..len).map(|i| pmax[i].max(pmax[i + span])).collect();
            min.push(nmin);
            max.push(nmax);
            span *= 2;
        }
        Self { min, max }
    }

    /// Inclusive range `[a, b]`.
    fn query(&self, a: usize, b: usize) -> (f64, f64) {
        let level = (usize::BITS - 1 - (b - a + 1).leading_zeros()) as usize;
        let span = 1 << level;
        (
            self.min[level][a].min(self.min[level][b + 1 - span]),
            self.max[level][a].max(self.max[level][b + 1 - span]),
        )
    }
}
