//! Numerical checks of the smoothness, second-order and path-regularity
//! conditions under which the interpolated estimators inherit the behaviour of
//! the pointwise ones.
//!
//! "o(lambda_n)" cannot be decided at a single `n`. A report is `satisfied`
//! when its statistic is at most `fraction * scale`; [`ratios_decrease`]
//! supplies the accompanying trend check along a schedule.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{Marginals, ModelSpec};
use crate::seed::derive_seed;

pub const DEFAULT_FRACTION: f64 = 0.1;
/// Refinement of the evaluation mesh relative to the mesh width.
pub const REFINEMENT: usize = 10;
const MAX_MESH_POINTS: usize = 200_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `lambda_n = 1`.
    One,
    /// `lambda_n = k^{-1/2}`.
    Clt,
}

impl LambdaMode {
    pub fn lambda(self, k: usize) -> f64 {
        match self {
            LambdaMode::One => 1.0,
            LambdaMode::Clt => 1.0 / (k as f64).sqrt(),
        }
    }
}

impl std::str::FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(LambdaMode::One),
            "clt" => Ok(LambdaMode::Clt),
            other => Err(Error::Parse(format!(
                "unknown lambda mode `{other}` (expected one|clt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub id: String,
    pub value: f64,
    pub lambda: f64,
    /// The quantity `value` is compared with (`lambda`, `lambda k/n`, or a fixed bound).
    pub scale: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub satisfied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ConditionReport {
    fn rate(id: &str, value: f64, lambda: f64, scale: f64, fraction: f64, argmax: Option<(f64, f64)>) -> Self {
        let threshold = fraction * scale;
        Self {
            id: id.to_string(),
            value,
            lambda,
            scale,
            ratio: value / scale,
            threshold,
            satisfied: value <= threshold,
            argmax,
            std_err: None,
            note: String::new(),
        }
    }
}

/// True when `value / scale` is nonincreasing along the given schedule order.
pub fn ratios_decrease(reports: &[ConditionReport]) -> bool {
    reports.windows(2).all(|w| w[1].ratio <= w[0].ratio)
}

/// Uniform points of step `delta / REFINEMENT` on `[0, 1]`, and the index
/// offsets that stay within `delta`.
fn refinement(delta: f64) -> (Vec<f64>, usize) {
    let step = delta / REFINEMENT as f64;
    let count = ((1.0 / step).ceil() as usize + 1).min(MAX_MESH_POINTS);
    let h = 1.0 / (count - 1) as f64;
    let reach = ((delta / h) + 1e-9).floor() as usize;
    ((0..count).map(|i| i as f64 * h).collect(), reach.max(1))
}

fn neighbor_pairs(len: usize, reach: usize) -> impl ParallelIterator<Item = (usize, usize)> {
    (0..len).into_par_iter().flat_map_iter(move |i| {
        (1..=reach)
            .filter(move |j| i + j < len)
            .flat_map(move |j| [(i, i + j), (i + j, i)])
    })
}

fn marginals_on(model: &ModelSpec, pts: &[f64], level: f64) -> Result<Vec<Marginals>> {
    pts.par_iter()
        .map(|&t| model.true_marginals(t, level).map_err(|e| e.at_point(t)))
        .collect()
}

/// Largest value and its pair; zero with no argmax when there are no pairs.
fn sup_with_arg<I: ParallelIterator<Item = (f64, (f64, f64))>>(iter: I) -> (f64, Option<(f64, f64)>) {
    let (v, arg) = iter.map(|(v, arg)| (v, Some(arg))).reduce(
        || (f64::NEG_INFINITY, None),
        |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
    );
    if arg.is_none() {
        (0.0, None)
    } else {
        (v, arg)
    }
}

/// `|g_s - g_t|`, `|a_s/a_t - 1|` and `|(U_s - U_t)/a_t|` for one ordered pair.
pub fn smoothness_terms(ms: &Marginals, mt: &Marginals) -> [f64; 3] {
    [
        (ms.gamma - mt.gamma).abs(),
        (ms.a / mt.a - 1.0).abs(),
        ((ms.u - mt.u) / mt.a).abs(),
    ]
}

/// Sups of the three smoothness statistics over `|s - t| <= delta_n`, at level `n/k`.
pub fn check_smoothness(
    model: &ModelSpec,
    grid: &Grid,
    n: usize,
    k: usize,
    mode: LambdaMode,
    fraction: f64,
) -> Result<[ConditionReport; 3]> {
    check_level(n, k)?;
    let model = model.resolve(n, k);
    let (pts, reach) = refinement(grid.mesh());
    let marg = marginals_on(&model, &pts, n as f64 / k as f64)?;
    let lambda = mode.lambda(k);
    let ids = ["gamma-smooth", "a-smooth", "u-smooth"];
    let mut out = Vec::with_capacity(3);
    for (q, id) in ids.iter().enumerate() {
        let (value, argmax) = sup_with_arg(
            neighbor_pairs(pts.len(), reach).map(|(i, j)| (smoothness_terms(&marg[i], &marg[j])[q], (pts[i], pts[j]))),
        );
        let mut r = ConditionReport::rate(id, value, lambda, lambda, fraction, argmax);
        r.note = format!("sup over |s-t| <= {:.3e} on a {}-point mesh", grid.mesh(), pts.len());
        out.push(r);
    }
    Ok(out.try_into().expect("three reports"))
}

/// `sup_t sup_y |(U_t(y n/k) - U_t(n/k)) / a_t(n/k) - (y^g - 1)/g|` over the grid
/// points and a log-spaced `y` mesh, with exact quantiles and `a_t = g_t U_t`.
pub fn check_m(
    model: &ModelSpec,
    grid: &Grid,
    n: usize,
    k: usize,
    y_range: (f64, f64),
    mode: LambdaMode,
    fraction: f64,
) -> Result<ConditionReport> {
    check_level(n, k)?;
    let (y0, y1) = y_range;
    if !(y0 > 0.0 && y1 > y0 && y1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < y0 < y1 < inf, got ({y0}, {y1})"
        )));
    }
    let level = n as f64 / k as f64;
    if !(y0 * level > 1.0) {
        return Err(Error::InvalidArgument(format!("y0 n/k = {} must exceed 1", y0 * level)));
    }
    let model = model.resolve(n, k);
    const Y_POINTS: usize = 33;
    let ys: Vec<f64> = (0..Y_POINTS)
        .map(|i| (y0.ln() + (y1 / y0).ln() * i as f64 / (Y_POINTS - 1) as f64).exp())
        .chain(std::iter::once(1.0).filter(|&y| y > y0 && y < y1))
        .collect();
    let rows = grid
        .points()
        .par_iter()
        .map(|&t| -> Result<(f64, (f64, f64))> {
            let g = model.gamma(t);
            let u = model.exact_quantile(t, level)?;
            let a = g * u;
            let mut best = (0.0, (t, f64::NAN));
            for &y in &ys {
                let uy = model.exact_quantile(t, y * level)?;
                let limit = if g.abs() < crate::margins::GAMMA_ZERO_TOL {
                    y.ln()
                } else {
                    (y.powf(g) - 1.0) / g
                };
                let v = ((uy - u) / a - limit).abs();
                if v > best.0 || best.1 .1.is_nan() {
                    best = (v, (t, y));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let (value, argmax) = rows
        .into_iter()
        .fold((0.0, None), |acc: (f64, Option<(f64, f64)>), (v, arg)| {
            if acc.1.is_none() || v > acc.0 {
                (v, Some(arg))
            } else {
                acc
            }
        });
    let lambda = mode.lambda(k);
    let mut r = ConditionReport::rate("M", value, lambda, lambda, fraction, argmax);
    r.note = format!("argmax is (t, y); y over [{y0}, {y1}]");
    Ok(r)
}

/// Monte Carlo estimate of
/// `sup P{|X_s - X_t| / a_t > eps lambda, X_t > U_t + tau a_t}` over
/// neighbouring grid pairs, compared with `lambda k / n`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_s(
    model: &ModelSpec,
    grid: Arc<Grid>,
    n: usize,
    k: usize,
    tau: f64,
    eps: f64,
    mode: LambdaMode,
    reps: usize,
    seed: u64,
    fraction: f64,
) -> Result<ConditionReport> {
    check_level(n, k)?;
    if reps == 0 {
        return Err(Error::InvalidArgument("Monte Carlo estimate needs reps > 0".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let model = model.resolve(n, k);
    let pts = grid.points().to_vec();
    let tau_max = pts
        .iter()
        .map(|&t| {
            let g = model.gamma(t);
            if g < 0.0 {
                -1.0 / g
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    if !(tau.is_finite() && tau < tau_max) {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau} must be finite and below tau_max = {tau_max}"
        )));
    }
    let level = n as f64 / k as f64;
    let lambda = mode.lambda(k);
    let (u, a): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .map(|&t| model.exact_quantile(t, level).map(|u| (u, model.gamma(t) * u)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let pairs: Vec<(usize, usize)> = (0..pts.len().saturating_sub(1))
        .flat_map(|i| [(i, i + 1), (i + 1, i)])
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "condition S needs at least two grid points".into(),
        ));
    }
    let sim = model.simulator(grid)?;
    let counts = (0..reps)
        .into_par_iter()
        .fold(
            || vec![0u64; pairs.len()],
            |mut acc, i| {
                let d = sim.draw(derive_seed(seed, 0, 0, i as u64));
                let x = d.path.values();
                for (c, &(s, t)) in acc.iter_mut().zip(&pairs) {
                    if x[t] > u[t] + tau * a[t] && (x[s] - x[t]).abs() / a[t] > eps * lambda {
                        *c += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; pairs.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let (best, &hits) = counts
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .expect("nonempty pairs");
    let p = hits as f64 / reps as f64;
    let (s, t) = pairs[best];
    let mut r = ConditionReport::rate(
        "S",
        p,
        lambda,
        lambda * k as f64 / n as f64,
        fraction,
        Some((pts[s], pts[t])),
    );
    r.std_err = Some((p * (1.0 - p) / reps as f64).sqrt());
    r.note = format!(
        "{reps} paths, tau = {tau}, eps = {eps}, {} ordered neighbour pairs",
        pairs.len()
    );
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshRecommendation {
    /// `min(k^{-1/(2 a2)} (log n)^{-1/a2}, k^{-1/a1})`.
    pub bound: f64,
    /// `bound / log n`.
    pub recommended: f64,
}

pub fn recommend_mesh(alpha1: f64, alpha2: f64, n: usize, k: usize) -> Result<MeshRecommendation> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Hölder exponents must be positive (got {alpha1}, {alpha2})"
        )));
    }
    check_level(n, k)?;
    let (kf, ln) = (k as f64, (n as f64).ln());
    let bound = (kf.powf(-0.5 / alpha2) * ln.powf(-1.0 / alpha2)).min(kf.powf(-1.0 / alpha1));
    Ok(MeshRecommendation {
        bound,
        recommended: bound / ln,
    })
}

/// `(alpha_1, alpha_2)`: increment exponent of the Gaussian factor (infinite when
/// there is none) and Hölder exponent of `gamma`.
pub fn model_exponents(model: &ModelSpec) -> (f64, f64) {
    let alpha1 = match model {
        ModelSpec::ExpGaussian { covariance, .. } => covariance.increment_bound().0,
        _ => f64::INFINITY,
    };
    (alpha1, model.gamma_curve().holder().0)
}

pub fn recommend_mesh_for(model: &ModelSpec, n: usize, k: usize) -> Result<MeshRecommendation> {
    let (a1, a2) = model_exponents(model);
    recommend_mesh(a1, a2, n, k)
}

/// Numerical check of the two deterministic consequences of (M) and (S):
///
/// * `neighbour-order`: `min (U_s + tau_tilde a_s - U_t - tau a_t) / a_t` over
///   `|s - t| <= delta_n`, satisfied when nonnegative;
/// * `scale-ratio`: `sup a_t / a_s` over the same pairs, satisfied when at most `bound`.
pub fn check_lemma31(
    model: &ModelSpec,
    grid: &Grid,
    n: usize,
    k: usize,
    tau: f64,
    tau_tilde: f64,
    bound: f64,
) -> Result<[ConditionReport; 2]> {
    check_level(n, k)?;
    if !(tau_tilde > tau) {
        return Err(Error::InvalidArgument(format!(
            "need tau_tilde > tau (got {tau_tilde} <= {tau})"
        )));
    }
    let model = model.resolve(n, k);
    let (pts, reach) = refinement(grid.mesh());
    let marg = marginals_on(&model, &pts, n as f64 / k as f64)?;

    let (neg_margin, low_arg) = sup_with_arg(neighbor_pairs(pts.len(), reach).map(|(i, j)| {
        let (ms, mt) = (&marg[i], &marg[j]);
        (
            -((ms.u + tau_tilde * ms.a - mt.u - tau * mt.a) / mt.a),
            (pts[i], pts[j]),
        )
    }));
    let margin = -neg_margin;
    let lowbd = ConditionReport {
        id: "neighbour-order".into(),
        value: margin,
        lambda: 1.0,
        scale: 1.0,
        ratio: margin,
        threshold: 0.0,
        satisfied: margin >= 0.0,
        argmax: low_arg,
        std_err: None,
        note: format!("minimum standardized margin, tau = {tau}, tau_tilde = {tau_tilde}"),
    };

    let (ratio, arg) =
        sup_with_arg(neighbor_pairs(pts.len(), reach).map(|(i, j)| (marg[j].a / marg[i].a, (pts[i], pts[j]))));
    let mut abound = ConditionReport::rate("scale-ratio", ratio, 1.0, bound, 1.0, arg);
    abound.note = format!("sup a_t / a_s, argmax is (s, t), bound {bound}");
    Ok([lowbd, abound])
}

fn check_level(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CovarianceSpec, GammaCurve, Jump};
    use proptest::prelude::*;

    fn pareto(gamma: GammaCurve) -> ModelSpec {
        ModelSpec::ParetoPower { gamma }
    }

    #[test]
    fn smoothness_pair_example() {
        let ms = Marginals {
            gamma: 0.5,
            u: 100f64.powf(0.5),
            a: 0.5 * 100f64.powf(0.5),
        };
        let mt = Marginals {
            gamma: 0.6,
            u: 100f64.powf(0.6),
            a: 0.6 * 100f64.powf(0.6),
        };
        let terms = smoothness_terms(&ms, &mt);
        let expected = ((5.0 / 6.0) * 100f64.powf(-0.1) - 1.0).abs();
        assert!((terms[1] - expected).abs() < 1e-12);
        assert!((terms[1] - 0.474).abs() < 1e-3);
    }

    #[test]
    fn constant_gamma_is_perfectly_smooth() {
        let grid = Grid::uniform(20).unwrap();
        let reports = check_smoothness(
            &pareto(GammaCurve::constant(0.4)),
            &grid,
            10_000,
            100,
            LambdaMode::Clt,
            0.1,
        )
        .unwrap();
        for r in &reports {
            assert_eq!(r.value, 0.0);
            assert!(r.satisfied);
        }
    }

    #[test]
    fn rough_gamma_with_fixed_kappa_violates_u_smoothness() {
        let (n, k) = (100_000, 316);
        let level = n as f64 / k as f64;
        let kappa = 1.0;
        let spacing = 0.1;
        let model = pareto(GammaCurve::Rough {
            base: 0.5,
            spacing,
            jump: Jump::PerLevel { kappa },
        });
        // mesh as wide as half a tooth: neighbours reach from base to base - jump
        let grid = Grid::uniform(20).unwrap();
        let [_, _, u] = check_smoothness(&model, &grid, n, k, LambdaMode::One, 0.1).unwrap();
        let g_low = 0.5 - kappa / level.ln();
        // s at a peak and t at the adjacent dip: |(U_s - U_t)/a_t| = (level^{g_s - g_t} - 1) / g_t
        let expected = (kappa.exp() - 1.0) / g_low;
        assert!(
            (u.value - expected).abs() < 1e-9 * expected,
            "{} vs {}",
            u.value,
            expected
        );
        assert!(!u.satisfied);
    }

    #[test]
    fn smoothness_grows_with_holder_constant() {
        let grid = Grid::uniform(25).unwrap();
        let mut last = [0.0; 3];
        for amp in [0.05, 0.1, 0.2, 0.4] {
            let model = pareto(GammaCurve::Power {
                base: 0.3,
                amplitude: amp,
                exponent: 1.0,
            });
            let r = check_smoothness(&model, &grid, 5000, 70, LambdaMode::One, 0.1).unwrap();
            for q in 0..3 {
                assert!(r[q].value > last[q]);
                last[q] = r[q].value;
            }
        }
    }

    #[test]
    fn m_statistic_vanishes_for_pareto_power() {
        let model = pareto("sine:0.5,0.3,1".parse().unwrap());
        let grid = Grid::uniform(30).unwrap();
        let r = check_m(&model, &grid, 10_000, 100, (0.2, 5.0), LambdaMode::Clt, 0.1).unwrap();
        assert!(r.value < 1e-12, "{}", r.value);
    }

    #[test]
    fn m_statistic_is_small_but_positive_for_exp_gaussian() {
        let model = ModelSpec::ExpGaussian {
            gamma: GammaCurve::constant(0.5),
            covariance: CovarianceSpec::Exponential {
                variance: 0.25,
                length: 0.2,
            },
        };
        let grid = Grid::uniform(4).unwrap();
        let small = check_m(&model, &grid, 10_000, 100, (0.5, 2.0), LambdaMode::One, 0.1).unwrap();
        let large = check_m(&model, &grid, 1_000_000, 100, (0.5, 2.0), LambdaMode::One, 0.1).unwrap();
        assert!(small.value > 0.0 && small.value < 0.1);
        assert!(large.value < small.value);
    }

    #[test]
    fn m_rejects_bad_range() {
        let model = pareto(GammaCurve::constant(0.5));
        let grid = Grid::uniform(4).unwrap();
        assert!(check_m(&model, &grid, 1000, 10, (2.0, 1.0), LambdaMode::One, 0.1).is_err());
        assert!(check_m(&model, &grid, 1000, 10, (0.001, 1.0), LambdaMode::One, 0.1).is_err());
    }

    #[test]
    fn s_probability_zero_for_constant_gamma() {
        let model = pareto(GammaCurve::constant(0.7));
        let grid = Arc::new(Grid::uniform(10).unwrap());
        let r = estimate_s(&model, grid, 10_000, 100, 0.0, 0.01, LambdaMode::One, 5_000, 1, 0.1).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.satisfied);
    }

    #[test]
    fn s_is_continuous_in_variance() {
        let gamma: GammaCurve = "sine:0.5,0.2,1".parse().unwrap();
        let grid = Arc::new(Grid::uniform(8).unwrap());
        let pp = estimate_s(
            &pareto(gamma.clone()),
            grid.clone(),
            10_000,
            100,
            0.0,
            0.5,
            LambdaMode::One,
            20_000,
            3,
            0.1,
        )
        .unwrap();
        let eg = ModelSpec::ExpGaussian {
            gamma,
            covariance: CovarianceSpec::Exponential {
                variance: 1e-14,
                length: 0.2,
            },
        };
        let near = estimate_s(&eg, grid, 10_000, 100, 0.0, 0.5, LambdaMode::One, 20_000, 3, 0.1).unwrap();
        assert!(pp.value > 0.0);
        assert!((pp.value - near.value).abs() <= 3.0 * pp.std_err.unwrap().max(1e-4));
    }

    #[test]
    fn s_rejects_zero_reps_and_bad_tau() {
        let model = pareto(GammaCurve::constant(0.7));
        let grid = Arc::new(Grid::uniform(4).unwrap());
        assert!(estimate_s(&model, grid.clone(), 1000, 10, 0.0, 0.1, LambdaMode::One, 0, 1, 0.1).is_err());
        assert!(estimate_s(&model, grid, 1000, 10, f64::NAN, 0.1, LambdaMode::One, 10, 1, 0.1).is_err());
    }

    #[test]
    fn mesh_examples() {
        let r = recommend_mesh(1.0, 1.0, 10_000, 100).unwrap();
        let t1 = 0.1 / 10_000f64.ln();
        assert!(t1 > 0.01);
        assert!((r.bound - 0.01).abs() < 1e-15);
        assert!((r.recommended - 0.01 / 10_000f64.ln()).abs() < 1e-15);
        let r = recommend_mesh(2.0, 100.0, 10_000, 100).unwrap();
        assert!((r.bound - 0.1).abs() < 1e-12);
        assert!(recommend_mesh(1.0, 1.0, 100, 100).is_err());
        assert!(recommend_mesh(0.0, 1.0, 1000, 10).is_err());
    }

    #[test]
    fn neighbour_order_constant_gamma() {
        let model = pareto(GammaCurve::constant(0.4));
        let grid = Grid::uniform(10).unwrap();
        let [low, ab] = check_lemma31(&model, &grid, 10_000, 100, 0.5, 1.5, 2.0).unwrap();
        assert!((low.value - 1.0).abs() < 1e-12);
        assert!(low.satisfied);
        assert!((ab.value - 1.0).abs() < 1e-12);
        assert!(ab.satisfied);
    }

    #[test]
    fn neighbour_checks_smooth_model_on_recommended_mesh() {
        let model = pareto("power:0.2,0.4,1".parse().unwrap());
        let (n, k) = (10_000, 100);
        let mesh = recommend_mesh_for(&model, n, k).unwrap();
        let grid = Grid::with_mesh(mesh.recommended).unwrap();
        let [low, ab] = check_lemma31(&model, &grid, n, k, 0.0, 0.5, 2.0).unwrap();
        assert!(low.satisfied && ab.satisfied);
    }

    #[test]
    fn scale_ratio_grows_for_rough_gamma() {
        let rough = GammaCurve::Rough {
            base: 0.5,
            spacing: 0.1,
            jump: Jump::Fixed { size: 0.25 },
        };
        let grid = Grid::uniform(20).unwrap();
        let mut last = 0.0;
        for n in [1_000, 100_000, 10_000_000] {
            let k = (n as f64).sqrt().ceil() as usize;
            let [_, ab] = check_lemma31(&pareto(rough.clone()), &grid, n, k, 0.0, 0.5, 2.0).unwrap();
            let level = n as f64 / k as f64;
            let closed = (0.5 / 0.25) * level.powf(0.25);
            assert!((ab.value - closed).abs() < 1e-9 * closed);
            assert!(ab.value > last);
            last = ab.value;
        }
        assert!(last > 2.0);
    }

    #[test]
    fn lambda_modes() {
        assert_eq!(LambdaMode::One.lambda(100), 1.0);
        assert_eq!(LambdaMode::Clt.lambda(100), 0.1);
        assert_eq!("clt".parse::<LambdaMode>().unwrap(), LambdaMode::Clt);
    }

    proptest! {
        #[test]
        fn mesh_decreases_in_k(a1 in 0.2f64..2.0, a2 in 0.2f64..1.0, k in 2usize..5000) {
            let n = 100_000;
            let lo = recommend_mesh(a1, a2, n, k).unwrap();
            let hi = recommend_mesh(a1, a2, n, k + 1).unwrap();
            prop_assert!(hi.bound <= lo.bound);
        }
    }
}
