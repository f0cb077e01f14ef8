//! Monte Carlo experiments: configuration, replication with derived seeds,
//! aggregation and persistence.
//!
//! Every replicate draws path `i` from `derive_seed(master_seed, n_index, replicate, i)`,
//! so outputs depend only on the configuration, not on scheduling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::recommend_mesh_for;
use crate::error::{Error, Result};
use crate::expmeasure::{dc_distance, nu_hat, reference_complete_dependence, PointMeasure, ReferenceMeasure, TestSet};
use crate::grid::{Grid, PiecewiseLinearPath, SampledPath};
use crate::margins::{estimate_margins, quantile_estimate, top_order_statistics, MarginCurves};
use crate::models::{counterexample_error, Marginals, ModelSpec};
use crate::seed::derive_seed;
use crate::standardize::{scaled_atoms, xi_hat_all, xi_true_all};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum KRule {
    /// `k = ceil(n^theta)`.
    Power { theta: f64 },
    /// `k = ceil(fraction * n)`.
    Fraction { fraction: f64 },
    /// One `k` per entry of the schedule.
    Explicit { k: Vec<usize> },
}

impl KRule {
    pub fn k_for(&self, n: usize, index: usize) -> Result<usize> {
        let k = match self {
            KRule::Power { theta } => ((n as f64).powf(*theta) - 1e-9).ceil() as usize,
            KRule::Fraction { fraction } => (fraction * n as f64 - 1e-9).ceil() as usize,
            KRule::Explicit { k } => *k.get(index).ok_or_else(|| {
                Error::InvalidArgument(format!("explicit k rule has no entry for schedule index {index}"))
            })?,
        };
        if k == 0 || k >= n {
            return Err(Error::KOutOfRange { k, n });
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum GridRule {
    /// `intervals + 1` equally spaced points including 0 and 1.
    Uniform {
        intervals: usize,
    },
    /// Equally spaced points with the recommended mesh for the model at `(n, k)`,
    /// optionally multiplied by `scale`.
    Recommended {
        #[serde(default = "one")]
        scale: f64,
    },
    Explicit {
        points: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl GridRule {
    pub fn grid_for(&self, model: &ModelSpec, n: usize, k: usize) -> Result<Grid> {
        match self {
            GridRule::Uniform { intervals } => Grid::uniform(*intervals),
            GridRule::Recommended { scale } => Grid::with_mesh(scale * recommend_mesh_for(model, n, k)?.recommended),
            GridRule::Explicit { points } => Grid::new(points.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    /// With the model's exact marginal distribution functions.
    True,
    /// With the fitted generalized Pareto tails.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    CompleteDependence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTarget {
    /// `n p / k`; the exceedance probability is `p = np_over_k * k / n`.
    pub np_over_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMeasureTarget {
    pub c: f64,
    #[serde(default)]
    pub test_sets: Vec<TestSet>,
    pub standardize: Standardization,
    #[serde(default)]
    pub reference: Option<Reference>,
    #[serde(default = "default_reference_atoms")]
    pub reference_atoms: usize,
}

fn default_reference_atoms() -> usize {
    crate::expmeasure::DEFAULT_REFERENCE_ATOMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleTarget {
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    #[serde(default = "yes")]
    pub margins: bool,
    #[serde(default)]
    pub quantile: Option<QuantileTarget>,
    #[serde(default)]
    pub expmeasure: Option<ExpMeasureTarget>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleTarget>,
}

fn yes() -> bool {
    true
}

impl Default for Targets {
    fn default() -> Self {
        Self {
            margins: true,
            quantile: None,
            expmeasure: None,
            counterexample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n_schedule: Vec<usize>,
    pub k_rule: KRule,
    pub grid_rule: GridRule,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub targets: Targets,
    /// Evaluation mesh density relative to the observation grid.
    #[serde(default = "default_density")]
    pub eval_density: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Free-form remarks copied into the aggregate output.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn default_density() -> usize {
    8
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_schedule.is_empty() {
            return Err(Error::InvalidArgument("n schedule is empty".into()));
        }
        if self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("n schedule must be strictly increasing".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        if self.eval_density == 0 {
            return Err(Error::InvalidArgument("evaluation density must be at least 1".into()));
        }
        for (i, &n) in self.n_schedule.iter().enumerate() {
            let k = self.k_rule.k_for(n, i)?;
            self.model.resolve(n, k).validate()?;
        }
        if let Some(q) = &self.targets.quantile {
            if !(q.np_over_k > 0.0 && q.np_over_k <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "np/k = {} must lie in (0, 1]",
                    q.np_over_k
                )));
            }
        }
        if let Some(e) = &self.targets.expmeasure {
            if !(e.c > 0.0) {
                return Err(Error::InvalidArgument(format!("c = {} must be positive", e.c)));
            }
            for s in &e.test_sets {
                s.validate()?;
            }
        }
        if let Some(ce) = &self.targets.counterexample {
            if !matches!(self.model, ModelSpec::ParetoPower { .. }) {
                return Err(Error::InvalidArgument(
                    "the counterexample target needs the pareto-power model".into(),
                ));
            }
            if !(0.0..=1.0).contains(&ce.t) {
                return Err(Error::InvalidArgument(format!(
                    "counterexample location {} outside [0, 1]",
                    ce.t
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub n: usize,
    pub k: usize,
    pub replicate: usize,
    pub statistic_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
        };
        Self {
            count,
            mean,
            sd,
            median,
            min: sorted[0],
            max: sorted[count - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub k: usize,
    pub grid_points: usize,
    pub mesh: f64,
    pub eval_points: usize,
    pub lambda_clt: f64,
    pub replicates_ok: usize,
    pub failures: Vec<FailureRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dc_discretization_error: Option<f64>,
    pub statistics: BTreeMap<String, Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub mean_decreasing: bool,
    pub median_decreasing: bool,
    pub median_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub eval_density: usize,
    pub levels: Vec<LevelSummary>,
    pub trends: BTreeMap<String, Trend>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicateRow>,
    pub aggregate: Aggregate,
}

impl ExperimentResult {
    /// Summary of `statistic` at schedule position `index`.
    pub fn summary(&self, index: usize, statistic: &str) -> Option<&Summary> {
        self.aggregate.levels.get(index)?.statistics.get(statistic)
    }

    pub fn values(&self, n: usize, statistic: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n && r.statistic_id == statistic)
            .map(|r| r.value)
            .collect()
    }

    /// Writes `replicates.csv`, `aggregate.json` and `config-echo.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("replicates.csv"))?));
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        write_json(dir.join("aggregate.json"), &self.aggregate)?;
        write_json(dir.join("config-echo.json"), &self.config)?;
        Ok(())
    }
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_replicates<R: Read>(reader: R) -> Result<Vec<ReplicateRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ReplicateRow>, _>>()?)
}

/// Per-`n` statistic summaries, recomputed from replicate rows alone.
pub fn summarize_rows(rows: &[ReplicateRow]) -> BTreeMap<usize, BTreeMap<String, Summary>> {
    let mut grouped: BTreeMap<usize, BTreeMap<String, Vec<(usize, f64)>>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.n)
            .or_default()
            .entry(r.statistic_id.clone())
            .or_default()
            .push((r.replicate, r.value));
    }
    grouped
        .into_iter()
        .map(|(n, stats)| {
            let stats = stats
                .into_iter()
                .map(|(id, mut vals)| {
                    vals.sort_by_key(|(rep, _)| *rep);
                    let v: Vec<f64> = vals.into_iter().map(|(_, v)| v).collect();
                    (id, Summary::of(&v))
                })
                .collect();
            (n, stats)
        })
        .collect()
}

fn trends(levels: &[LevelSummary]) -> BTreeMap<String, Trend> {
    let mut ids: Vec<&String> = levels.iter().flat_map(|l| l.statistics.keys()).collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .filter_map(|id| {
            let seq: Vec<&Summary> = levels.iter().filter_map(|l| l.statistics.get(id)).collect();
            (seq.len() == levels.len() && seq.len() > 1).then(|| {
                (
                    id.clone(),
                    Trend {
                        mean_decreasing: seq.windows(2).all(|w| w[1].mean < w[0].mean),
                        median_decreasing: seq.windows(2).all(|w| w[1].median < w[0].median),
                        median_increasing: seq.windows(2).all(|w| w[1].median > w[0].median),
                    },
                )
            })
        })
        .collect()
}

/// `U_t(y)` from the exact quantile and `a_t(y) = gamma_t U_t(y)`.
pub fn level_marginals(model: &ModelSpec, t: f64, y: f64) -> Result<Marginals> {
    let gamma = model.gamma(t);
    let u = model.exact_quantile(t, y)?;
    Ok(Marginals { u, a: gamma * u, gamma })
}

/// Grid nodes merged with `density * (nodes - 1)` equal intervals on `[0, 1]`.
pub fn evaluation_points(grid: &Grid, density: usize) -> Vec<f64> {
    let intervals = density * grid.len().saturating_sub(1).max(1);
    let mut pts: Vec<f64> = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
    pts.extend_from_slice(grid.points());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Everything that is shared by the replicates at one schedule position.
struct Level {
    index: usize,
    n: usize,
    k: usize,
    model: ModelSpec,
    grid: Arc<Grid>,
    eval: Vec<f64>,
    truth: Vec<Marginals>,
    quantile_truth: Option<Vec<f64>>,
    reference: Option<ReferenceMeasure>,
}

impl Level {
    fn new(cfg: &ExperimentConfig, index: usize) -> Result<Self> {
        let n = cfg.n_schedule[index];
        let k = cfg.k_rule.k_for(n, index)?;
        let model = cfg.model.resolve(n, k);
        let grid = Arc::new(cfg.grid_rule.grid_for(&model, n, k)?);
        let eval = evaluation_points(&grid, cfg.eval_density);
        let level = n as f64 / k as f64;
        let needs_truth = cfg.targets.margins || cfg.targets.quantile.is_some() || cfg.targets.counterexample.is_some();
        let truth = if needs_truth {
            eval.par_iter()
                .map(|&t| level_marginals(&model, t, level).map_err(|e| e.at_point(t)))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let quantile_truth = match &cfg.targets.quantile {
            Some(q) => {
                let p = q.np_over_k * k as f64 / n as f64;
                Some(
                    eval.par_iter()
                        .map(|&t| model.exact_quantile(t, 1.0 / p).map_err(|e| e.at_point(t)))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        let reference = match &cfg.targets.expmeasure {
            Some(ExpMeasureTarget {
                c,
                reference: Some(Reference::CompleteDependence),
                reference_atoms,
                ..
            }) => Some(reference_complete_dependence(*c, *reference_atoms)?),
            _ => None,
        };
        Ok(Self {
            index,
            n,
            k,
            model,
            grid,
            eval,
            truth,
            quantile_truth,
            reference,
        })
    }

    fn run_replicate(&self, cfg: &ExperimentConfig, replicate: usize) -> Result<Vec<(String, f64)>> {
        let (n, k) = (self.n, self.k);
        let sim = self.model.simulator(Arc::clone(&self.grid))?;
        let draws = sim.draws(n, |i| {
            derive_seed(cfg.master_seed, self.index as u64, replicate as u64, i as u64)
        });
        let (paths, drivers): (Vec<SampledPath>, Vec<f64>) = draws.into_iter().map(|d| (d.path, d.driver)).unzip();
        let mut out = Vec::new();

        let needs_margins = cfg.targets.margins
            || cfg.targets.quantile.is_some()
            || cfg.targets.counterexample.is_some()
            || matches!(&cfg.targets.expmeasure, Some(e) if e.standardize == Standardization::Estimated);
        let margins = if needs_margins {
            Some(estimate_margins(&paths, k)?)
        } else {
            None
        };

        if let (true, Some(m)) = (cfg.targets.margins, &margins) {
            let [g, a, u] = self.margin_errors(m);
            let root_k = (k as f64).sqrt();
            out.push(("gamma_sup".into(), g));
            out.push(("a_sup".into(), a));
            out.push(("u_sup".into(), u));
            out.push(("gamma_sup_clt".into(), g * root_k));
            out.push(("a_sup_clt".into(), a * root_k));
            out.push(("u_sup_clt".into(), u * root_k));
        }

        if let (Some(q), Some(m), Some(truth)) = (&cfg.targets.quantile, &margins, &self.quantile_truth) {
            let p = q.np_over_k * k as f64 / n as f64;
            let nodes = m
                .triples
                .iter()
                .zip(self.grid.points())
                .map(|(tr, &t)| quantile_estimate(tr, n, k, p).map_err(|e| e.at_point(t)))
                .collect::<Result<Vec<_>>>()?;
            let node_curve = PiecewiseLinearPath::new(Arc::clone(&self.grid), nodes)?;
            let (mut star, mut interp) = (0.0f64, 0.0f64);
            for ((&t, x), mt) in self.eval.iter().zip(truth).zip(&self.truth) {
                let xs = quantile_estimate(&m.at(t), n, k, p).map_err(|e| e.at_point(t))?;
                star = star.max(((xs - x) / mt.a).abs());
                interp = interp.max(((node_curve.eval(t) - x) / mt.a).abs());
            }
            out.push(("quantile_star_sup".into(), star));
            out.push(("quantile_interp_sup".into(), interp));
        }

        if let Some(target) = &cfg.targets.expmeasure {
            let xi = match target.standardize {
                Standardization::True => xi_true_all(&self.model, &paths)?,
                Standardization::Estimated => xi_hat_all(margins.as_ref().expect("estimated above"), &paths, n, k)?,
            };
            let measure = PointMeasure::empirical(scaled_atoms(xi, n, k), k)?;
            for (i, set) in target.test_sets.iter().enumerate() {
                let label = set.label(i);
                let v = nu_hat(&measure, set);
                out.push((format!("nu_hat:{label}"), v));
                if let Some(r) = &self.reference {
                    out.push((format!("nu_err:{label}"), v - r.exact(set)));
                }
            }
            if let Some(r) = &self.reference {
                out.push(("dc".into(), dc_distance(&measure, &r.measure, target.c)));
            }
        }

        if let (Some(ce), Some(m)) = (&cfg.targets.counterexample, &margins) {
            let t = ce.t;
            let truth = level_marginals(&self.model, t, n as f64 / k as f64)?;
            let pipeline = (m.u.eval(t) - truth.u) / truth.a;
            let v_thr = top_order_statistics(&drivers, k)?.threshold;
            let closed = counterexample_error(self.model.gamma_curve(), &self.grid, n, k, t, v_thr);
            out.push(("counterexample_pipeline".into(), pipeline));
            out.push(("counterexample_closed".into(), closed));
            out.push(("counterexample_abs".into(), pipeline.abs()));
        }
        Ok(out)
    }

    /// `sup_t |g* - g|`, `sup_t |a*/a - 1|`, `sup_t |(U* - U)/a|` on the evaluation mesh.
    fn margin_errors(&self, m: &MarginCurves) -> [f64; 3] {
        let mut sup = [0.0f64; 3];
        for (&t, truth) in self.eval.iter().zip(&self.truth) {
            let est = m.at(t);
            sup[0] = sup[0].max((est.gamma_hat - truth.gamma).abs());
            sup[1] = sup[1].max((est.a_hat / truth.a - 1.0).abs());
            sup[2] = sup[2].max(((est.u_hat - truth.u) / truth.a).abs());
        }
        sup
    }
}

type ReplicateStats = Vec<(String, f64)>;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for index in 0..cfg.n_schedule.len() {
        let level = Level::new(cfg, index)?;
        let outcomes: Vec<(usize, Result<ReplicateStats>)> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| (r, level.run_replicate(cfg, r)))
            .collect();
        let mut failures = Vec::new();
        let mut level_rows = Vec::new();
        for (replicate, outcome) in outcomes {
            match outcome {
                Ok(stats) => level_rows.extend(stats.into_iter().map(|(statistic_id, value)| ReplicateRow {
                    n: level.n,
                    k: level.k,
                    replicate,
                    statistic_id,
                    value,
                })),
                Err(e) => failures.push(FailureRecord {
                    replicate,
                    error: Error::Replicate {
                        n: level.n,
                        replicate,
                        source: Box::new(e),
                    }
                    .to_string(),
                }),
            }
        }
        let statistics = summarize_rows(&level_rows).remove(&level.n).unwrap_or_default();
        levels.push(LevelSummary {
            n: level.n,
            k: level.k,
            grid_points: level.grid.len(),
            mesh: level.grid.mesh(),
            eval_points: level.eval.len(),
            lambda_clt: 1.0 / (level.k as f64).sqrt(),
            replicates_ok: cfg.replicates - failures.len(),
            failures,
            dc_discretization_error: level.reference.as_ref().map(|r| r.discretization_error),
            statistics,
        });
        rows.extend(level_rows);
    }
    let aggregate = Aggregate {
        model: cfg.model.name().to_string(),
        eval_density: cfg.eval_density,
        trends: trends(&levels),
        levels,
        notes: cfg.notes.clone(),
    };
    let result = ExperimentResult {
        config: cfg.clone(),
        rows,
        aggregate,
    };
    if let Some(dir) = &cfg.output_dir {
        result.write(dir)?;
    }
    Ok(result)
}
