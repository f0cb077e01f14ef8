//! Empirical exponent measures on path space, evaluation on exceedance sets,
//! restriction to `D_c = {z : sup|z| > c}` and the Lévy-Prokhorov type
//! distance `d_c` between finite atomic measures.

mod flow;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PiecewiseLinearPath};
use crate::models::ModelSpec;
use crate::seed::derive_seed;
use flow::FlowNetwork;

/// Equal-mass atoms on path space.
#[derive(Debug, Clone)]
pub struct PointMeasure {
    pub atoms: Vec<PiecewiseLinearPath>,
    pub weight: f64,
}

impl PointMeasure {
    pub fn new(atoms: Vec<PiecewiseLinearPath>, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "atom weight {weight} must be positive and finite"
            )));
        }
        Ok(Self { atoms, weight })
    }

    /// `(1/k) sum_i delta_{atom_i}`.
    pub fn empirical(atoms: Vec<PiecewiseLinearPath>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Self::new(atoms, 1.0 / k as f64)
    }

    pub fn total_mass(&self) -> f64 {
        self.weight * self.atoms.len() as f64
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestSetKind {
    /// `{z : min_{t in T} z(t) > r}`.
    MinExceedance,
    /// `{z : max_{t in T} z(t) > r}`.
    MaxExceedance,
    /// `{z : z(t0) > r}`.
    #[serde(alias = "pointwise")]
    PointwiseExceedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: TestSetKind,
    pub locations: Vec<f64>,
    pub level: f64,
}

impl TestSet {
    pub fn new(kind: TestSetKind, locations: Vec<f64>, level: f64) -> Result<Self> {
        let set = Self {
            id: None,
            kind,
            locations,
            level,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "test set level {} must be positive",
                self.level
            )));
        }
        if self.locations.is_empty() {
            return Err(Error::InvalidArgument("test set needs at least one location".into()));
        }
        if let Some(t) = self.locations.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidArgument(format!("test set location {t} outside [0, 1]")));
        }
        if self.kind == TestSetKind::PointwiseExceedance && self.locations.len() != 1 {
            return Err(Error::InvalidArgument(
                "pointwise test set takes exactly one location".into(),
            ));
        }
        Ok(())
    }

    /// Membership from the path values at the locations.
    pub fn contains(&self, z: &PiecewiseLinearPath) -> bool {
        self.contains_values(self.locations.iter().map(|&t| z.eval(t)))
    }

    fn contains_values(&self, mut values: impl Iterator<Item = f64>) -> bool {
        let r = self.level;
        match self.kind {
            TestSetKind::MinExceedance => values.all(|v| v > r),
            TestSetKind::MaxExceedance => values.any(|v| v > r),
            TestSetKind::PointwiseExceedance => values.next().is_some_and(|v| v > r),
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| format!("set{index}"))
    }
}

/// `weight * #{atoms in E}`.
pub fn nu_hat(measure: &PointMeasure, set: &TestSet) -> f64 {
    let hits = measure.atoms.iter().filter(|z| set.contains(z)).count();
    measure.weight * hits as f64
}

pub fn nu_hat_batch(measure: &PointMeasure, sets: &[TestSet]) -> Vec<f64> {
    sets.par_iter().map(|s| nu_hat(measure, s)).collect()
}

/// Keeps the atoms with sup-norm above `c`.
pub fn restrict(measure: &PointMeasure, c: f64) -> PointMeasure {
    PointMeasure {
        atoms: measure.atoms.iter().filter(|z| z.sup_norm() > c).cloned().collect(),
        weight: measure.weight,
    }
}

/// Largest value of `mu(S) - nu(S^eps)` over sets `S` of atoms of `mu`, where
/// `S^eps` collects the atoms of `nu` within `eps` of some atom of `S`.
///
/// For atomic measures the worst closed set `F` in the defining condition may be
/// taken to be a set of atoms of `mu`: `mu(F)` only sees the atoms in `F`, and
/// any additional points can only enlarge `F^eps`. By max-flow/min-cut on the
/// network source -> mu-atom (capacity mu-mass) -> nu-atom within eps (unbounded)
/// -> sink (capacity nu-mass), every cut is `mu(A \ S) + nu(N(S))` for the
/// source-side set `S`, so the deficiency is `mu(A) - maxflow`.
fn deficiency(dist: &[f64], b: usize, eps: f64, w_a: f64, w_b: f64) -> f64 {
    let a = dist.len().checked_div(b).unwrap_or(0);
    let total_a = w_a * a as f64;
    if a == 0 {
        return 0.0;
    }
    if b == 0 {
        return total_a;
    }
    let scale = total_a + w_b * b as f64;
    let (src, sink) = (a + b, a + b + 1);
    let mut net = FlowNetwork::new(a + b + 2, 1e-12 * scale);
    let unbounded = 2.0 * scale + 1.0;
    for i in 0..a {
        net.add_edge(src, i, w_a);
        for j in 0..b {
            if dist[i * b + j] <= eps {
                net.add_edge(i, a + j, unbounded);
            }
        }
    }
    for j in 0..b {
        net.add_edge(a + j, sink, w_b);
    }
    let f = net.max_flow(src, sink);
    let d = total_a - f;
    if d <= 1e-10 * scale {
        0.0
    } else {
        d
    }
}

/// `d_c` between two atomic measures, both restricted to `D_c` first.
///
/// With the distinct cross distances `0 = d_0 < ... < d_L` and
/// `G_i = max(def_mu(d_i), def_nu(d_i))`, the deficiency is constant on
/// `[d_i, d_{i+1})`, so the distance is `min_i max(d_i, G_i)`. `G` is
/// nonincreasing in `i`, which allows a binary search for the first `i` with
/// `G_i <= d_i`.
pub fn dc_distance(mu: &PointMeasure, nu: &PointMeasure, c: f64) -> f64 {
    let mu = restrict(mu, c);
    let nu = restrict(nu, c);
    if mu.is_empty() && nu.is_empty() {
        return 0.0;
    }
    if mu.is_empty() {
        return nu.total_mass();
    }
    if nu.is_empty() {
        return mu.total_mass();
    }
    let (a, b) = (mu.len(), nu.len());
    let dist: Vec<f64> = mu
        .atoms
        .par_iter()
        .flat_map_iter(|z| nu.atoms.iter().map(move |w| z.sup_distance(w)))
        .collect();
    let dist_t: Vec<f64> = (0..b)
        .flat_map(|j| (0..a).map(move |i| (i, j)))
        .map(|(i, j)| dist[i * b + j])
        .collect();

    let mut levels = dist.clone();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut gap = |i: usize| -> f64 {
        *cache.entry(i).or_insert_with(|| {
            let eps = levels[i];
            let (x, y) = rayon::join(
                || deficiency(&dist, b, eps, mu.weight, nu.weight),
                || deficiency(&dist_t, a, eps, nu.weight, mu.weight),
            );
            x.max(y)
        })
    };

    let last = levels.len() - 1;
    if gap(last) > levels[last] {
        return gap(last);
    }
    let (mut lo, mut hi) = (0, last);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if gap(mid) <= levels[mid] {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == 0 {
        0.0
    } else {
        levels[lo].min(gap(lo - 1))
    }
}

/// Atomic stand-in for a limit measure on `D_c`, with a closed form where known.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    pub measure: PointMeasure,
    pub c: f64,
    /// Bound on `|measure(E) - nu(E)|` for the exceedance sets with level `>= c`.
    pub discretization_error: f64,
}

impl ReferenceMeasure {
    /// `nu(E)` of the fully dependent limit, where every path is constant and
    /// `nu{const > r} = 1/r`.
    pub fn exact(&self, set: &TestSet) -> f64 {
        1.0 / set.level
    }
}

/// Constant paths at `c m / (j - 1/2)`, `j = 1..m`, each of mass `1/(c m)`.
pub fn reference_complete_dependence(c: f64, m: usize) -> Result<ReferenceMeasure> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("c = {c} must be positive")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("reference needs at least one atom".into()));
    }
    let cm = c * m as f64;
    let atoms = (1..=m)
        .map(|j| PiecewiseLinearPath::constant(cm / (j as f64 - 0.5)))
        .collect();
    Ok(ReferenceMeasure {
        measure: PointMeasure::new(atoms, 1.0 / cm)?,
        c,
        discretization_error: 1.0 / cm,
    })
}

pub const DEFAULT_REFERENCE_ATOMS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_err: f64,
}

/// `nu_u(E) = u P{xi / u in E}` by simulation of `xi` at the locations of `E`.
///
/// Membership only depends on the path at the locations, so paths are drawn on
/// exactly those points.
pub fn nu_oracle_monte_carlo(
    model: &ModelSpec,
    set: &TestSet,
    u: f64,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if reps == 0 {
        return Err(Error::InvalidArgument("Monte Carlo oracle needs reps > 0".into()));
    }
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!("level u = {u} must be positive")));
    }
    set.validate()?;
    let mut pts = set.locations.clone();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let grid = Arc::new(Grid::new(pts)?);
    let sim = model.simulator(Arc::clone(&grid))?;
    let hits = (0..reps)
        .into_par_iter()
        .map(|i| {
            let d = sim.draw(derive_seed(seed, 0, 0, i as u64));
            let xi = crate::standardize::xi_true(model, &d.path)?;
            let z = PiecewiseLinearPath::new(Arc::clone(&grid), xi.values.iter().map(|v| v / u).collect())?;
            Ok::<usize, Error>(usize::from(set.contains(&z)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = hits as f64 / reps as f64;
    Ok(MonteCarloEstimate {
        value: u * p,
        std_err: u * (p * (1.0 - p) / reps as f64).sqrt(),
    })
}
