use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use tailgrid::conditions::{model_exponents, DEFAULT_FRACTION};
use tailgrid::expmeasure::{dc_distance, nu_hat_batch, reference_complete_dependence, restrict, PointMeasure, TestSet};
use tailgrid::harness::{level_marginals, run_experiment, ExperimentConfig};
use tailgrid::io::{read_grid_file, read_paths_file, write_paths};
use tailgrid::margins::{estimate_margins, moment_asymptotic_variance};
use tailgrid::standardize::{scaled_atoms, xi_hat_all, xi_true_all};
use tailgrid::{
    check_lemma31, check_m, check_smoothness, estimate_s, recommend_mesh_for, ConditionReport, CovarianceSpec,
    GammaCurve, Grid, LambdaMode, MeshRecommendation, ModelSpec,
};

#[derive(Parser)]
#[command(
    name = "tailgrid",
    version,
    about = "Tail estimation for processes observed on a grid"
)]
struct Cli {
    /// Master seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, or directory for `experiment`. Tables go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw iid paths from a model on a grid.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        /// `uniform:M` (M intervals) or `file:grid.json`.
        #[arg(long, default_value = "uniform:10")]
        grid: String,
    },
    /// Fit the marginal tail triple at every grid point and interpolate.
    Margins {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Number of equally spaced evaluation points; the grid nodes when omitted.
        #[arg(long)]
        eval_points: Option<usize>,
        #[command(flatten)]
        model: OptionalModelArgs,
    },
    /// Empirical exponent measure on test sets and its d_c distance to a reference.
    Expmeasure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// JSON array of test sets.
        #[arg(long)]
        test_sets: PathBuf,
        #[arg(long, value_enum)]
        reference: Option<ReferenceArg>,
        #[arg(long, default_value_t = 512)]
        reference_atoms: usize,
        #[arg(long, value_enum, default_value = "estimated")]
        standardize: StandardizeArg,
        #[command(flatten)]
        model: OptionalModelArgs,
    },
    /// Evaluate the smoothness and regularity conditions for a model.
    CheckConditions {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// `uniform:M`, `file:grid.json` or `recommended`.
        #[arg(long, default_value = "recommended")]
        grid: String,
        #[arg(long, default_value = "one")]
        lambda: LambdaMode,
        #[arg(long, default_value_t = DEFAULT_FRACTION)]
        fraction: f64,
        #[arg(long, default_value_t = 0.5)]
        y0: f64,
        #[arg(long, default_value_t = 2.0)]
        y1: f64,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        tau_tilde: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Monte Carlo replicates for the path-regularity condition; skipped when 0.
        #[arg(long, default_value_t = 2000)]
        s_reps: usize,
        #[arg(long, default_value_t = 2.0)]
        a_bound: f64,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    ParetoPower,
    ExpGaussian,
    CompleteDependence,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    CompleteDependence,
}

#[derive(Clone, Copy, ValueEnum)]
enum StandardizeArg {
    Estimated,
    True,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// `const:G`, `power:B,A,E`, `sine:M,A,F`, `rough:B,J,S` or `rough-kappa:B,K,S`.
    #[arg(long)]
    gamma: GammaCurve,
    /// `exp:VAR,LEN` or `fbm:VAR,H`; required for exp-gaussian.
    #[arg(long)]
    cov: Option<CovarianceSpec>,
}

#[derive(Args)]
struct OptionalModelArgs {
    /// Model the paths were drawn from, for truth columns.
    #[arg(long, value_enum, requires = "gamma")]
    model: Option<ModelKind>,
    #[arg(long)]
    gamma: Option<GammaCurve>,
    #[arg(long)]
    cov: Option<CovarianceSpec>,
}

fn build_model(kind: ModelKind, gamma: GammaCurve, cov: Option<CovarianceSpec>) -> Result<ModelSpec> {
    let model = match kind {
        ModelKind::ParetoPower => ModelSpec::ParetoPower { gamma },
        ModelKind::CompleteDependence => ModelSpec::CompleteDependence { gamma },
        ModelKind::ExpGaussian => ModelSpec::ExpGaussian {
            gamma,
            covariance: cov.context("--cov is required for exp-gaussian")?,
        },
    };
    model.validate()?;
    Ok(model)
}

impl ModelArgs {
    fn build(&self) -> Result<ModelSpec> {
        build_model(self.model, self.gamma.clone(), self.cov.clone())
    }
}

impl OptionalModelArgs {
    fn build(&self) -> Result<Option<ModelSpec>> {
        match (self.model, &self.gamma) {
            (Some(kind), Some(gamma)) => build_model(kind, gamma.clone(), self.cov.clone()).map(Some),
            _ => Ok(None),
        }
    }
}

fn parse_grid(spec: &str, recommended: Option<MeshRecommendation>) -> Result<Grid> {
    if spec == "recommended" {
        let rec = recommended.context("a recommended grid needs a model, n and k")?;
        return Ok(Grid::with_mesh(rec.recommended)?);
    }
    match spec.split_once(':') {
        Some(("uniform", m)) => Ok(Grid::uniform(m.parse().context("uniform:M expects an integer")?)?),
        Some(("file", path)) => Ok(read_grid_file(path)?),
        _ => bail!("grid must be uniform:M, file:PATH or recommended, got `{spec}`"),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(cli: &Cli, model: &ModelArgs, n: usize, grid: &str) -> Result<()> {
    let model = model.build()?;
    let grid = Arc::new(parse_grid(grid, None)?);
    let paths = model.simulate(grid, n, cli.seed.unwrap_or(0))?;
    write_paths(sink(cli.out.as_deref())?, &paths)?;
    Ok(())
}

#[derive(Serialize)]
struct MarginRow {
    t: f64,
    gamma_hat: f64,
    a_hat: f64,
    u_hat: f64,
    gamma_true: Option<f64>,
    a_true: Option<f64>,
    u_true: Option<f64>,
    std_err_gamma: f64,
}

fn margins(cli: &Cli, input: &Path, k: usize, eval_points: Option<usize>, model: &OptionalModelArgs) -> Result<()> {
    let paths = read_paths_file(input)?;
    let n = paths.len();
    let curves = estimate_margins(&paths, k)?;
    let model = model.build()?.map(|m| m.resolve(n, k));
    let ts: Vec<f64> = match eval_points {
        Some(0 | 1) => bail!("--eval-points needs at least 2 points"),
        Some(m) => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
        None => curves.grid.points().to_vec(),
    };
    let level = n as f64 / k as f64;
    let rows = ts
        .par_iter()
        .map(|&t| {
            let est = curves.at(t);
            let truth = model.as_ref().map(|m| level_marginals(m, t, level)).transpose()?;
            Ok(MarginRow {
                t,
                gamma_hat: est.gamma_hat,
                a_hat: est.a_hat,
                u_hat: est.u_hat,
                gamma_true: truth.map(|m| m.gamma),
                a_true: truth.map(|m| m.a),
                u_true: truth.map(|m| m.u),
                std_err_gamma: (moment_asymptotic_variance(est.gamma_hat) / k as f64).sqrt(),
            })
        })
        .collect::<tailgrid::Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(sink(cli.out.as_deref())?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct NuRow {
    set_id: String,
    nu_hat: f64,
    nu_ref: Option<f64>,
    abs_err: Option<f64>,
    dc: Option<f64>,
    dc_discretization_error: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn expmeasure(
    cli: &Cli,
    input: &Path,
    k: usize,
    c: f64,
    test_sets: &Path,
    reference: Option<ReferenceArg>,
    reference_atoms: usize,
    standardize: StandardizeArg,
    model: &OptionalModelArgs,
) -> Result<()> {
    let sets: Vec<TestSet> =
        serde_json::from_reader(File::open(test_sets).context("opening test sets")?).context("parsing test sets")?;
    for set in &sets {
        set.validate()?;
    }
    let paths = read_paths_file(input)?;
    let n = paths.len();
    let standardized = match standardize {
        StandardizeArg::Estimated => xi_hat_all(&estimate_margins(&paths, k)?, &paths, n, k)?,
        StandardizeArg::True => {
            let model = model.build()?.context("--standardize true needs --model and --gamma")?;
            xi_true_all(&model.resolve(n, k), &paths)?
        }
    };
    let measure = PointMeasure::empirical(scaled_atoms(standardized, n, k), k)?;
    let reference = match reference {
        Some(ReferenceArg::CompleteDependence) => Some(reference_complete_dependence(c, reference_atoms)?),
        None => None,
    };
    let values = nu_hat_batch(&measure, &sets);
    let mut w = csv::Writer::from_writer(sink(cli.out.as_deref())?);
    for (i, (set, value)) in sets.iter().zip(values).enumerate() {
        let exact = reference.as_ref().map(|r| r.exact(set));
        w.serialize(NuRow {
            set_id: set.label(i),
            nu_hat: value,
            nu_ref: exact,
            abs_err: exact.map(|e| (value - e).abs()),
            dc: None,
            dc_discretization_error: None,
        })?;
    }
    let restricted = restrict(&measure, c);
    let total = restricted.total_mass();
    w.serialize(NuRow {
        set_id: "total".into(),
        nu_hat: total,
        nu_ref: reference.as_ref().map(|r| r.measure.total_mass()),
        abs_err: reference.as_ref().map(|r| (total - r.measure.total_mass()).abs()),
        dc: reference.as_ref().map(|r| dc_distance(&measure, &r.measure, c)),
        dc_discretization_error: reference.as_ref().map(|r| r.discretization_error),
    })?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ConditionsOutput {
    model: ModelSpec,
    n: usize,
    k: usize,
    lambda_mode: LambdaMode,
    fraction: f64,
    alpha1: f64,
    alpha2: f64,
    mesh_recommendation: MeshRecommendation,
    grid_points: usize,
    mesh: f64,
    reports: Vec<ConditionReport>,
}

#[allow(clippy::too_many_arguments)]
fn check_conditions(
    cli: &Cli,
    model: &ModelArgs,
    n: usize,
    k: usize,
    grid: &str,
    lambda: LambdaMode,
    fraction: f64,
    (y0, y1): (f64, f64),
    (tau, tau_tilde, eps): (f64, f64, f64),
    s_reps: usize,
    a_bound: f64,
) -> Result<()> {
    let model = model.build()?;
    let rec = recommend_mesh_for(&model, n, k)?;
    let grid = Arc::new(parse_grid(grid, Some(rec))?);
    let mut reports: Vec<ConditionReport> = check_smoothness(&model, &grid, n, k, lambda, fraction)?.into();
    reports.push(check_m(&model, &grid, n, k, (y0, y1), lambda, fraction)?);
    if s_reps > 0 {
        let seed = cli.seed.unwrap_or(0);
        reports.push(estimate_s(
            &model,
            Arc::clone(&grid),
            n,
            k,
            tau,
            eps,
            lambda,
            s_reps,
            seed,
            fraction,
        )?);
    }
    reports.extend(check_lemma31(&model, &grid, n, k, tau, tau_tilde, a_bound)?);
    let (alpha1, alpha2) = model_exponents(&model);
    let output = ConditionsOutput {
        model,
        n,
        k,
        lambda_mode: lambda,
        fraction,
        alpha1,
        alpha2,
        mesh_recommendation: rec,
        grid_points: grid.len(),
        mesh: grid.mesh(),
        reports,
    };
    let mut w = sink(cli.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &output)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn experiment(cli: &Cli, config: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    cfg.output_dir = Some(dir.clone());
    let result = run_experiment(&cfg)?;
    result.write(&dir)?;
    for level in &result.aggregate.levels {
        eprintln!(
            "n={} k={} grid_points={} replicates_ok={} failures={}",
            level.n,
            level.k,
            level.grid_points,
            level.replicates_ok,
            level.failures.len()
        );
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Simulate { model, n, grid } => simulate(&cli, model, *n, grid),
        Command::Margins {
            input,
            k,
            eval_points,
            model,
        } => margins(&cli, input, *k, *eval_points, model),
        Command::Expmeasure {
            input,
            k,
            c,
            test_sets,
            reference,
            reference_atoms,
            standardize,
            model,
        } => expmeasure(
            &cli,
            input,
            *k,
            *c,
            test_sets,
            *reference,
            *reference_atoms,
            *standardize,
            model,
        ),
        Command::CheckConditions {
            model,
            n,
            k,
            grid,
            lambda,
            fraction,
            y0,
            y1,
            tau,
            tau_tilde,
            eps,
            s_reps,
            a_bound,
        } => check_conditions(
            &cli,
            model,
            *n,
            *k,
            grid,
            *lambda,
            *fraction,
            (*y0, *y1),
            (*tau, *tau_tilde, *eps),
            *s_reps,
            *a_bound,
        ),
        Command::Experiment { config } => experiment(&cli, config),
    }
}
