//! Moment-type marginal tail estimators on the grid and their interpolated
//! versions.
//!
//! At each location the `k + 1` largest observations give
//!
//! ```text
//! M_j    = (1/k) sum_{i=1..k} log(X_(n-i+1) / X_(n-k))^j,   j = 1, 2
//! g_pos  = M_1
//! g_neg  = 1 - 1/2 (1 - M_1^2 / M_2)^{-1}
//! gamma  = g_pos + g_neg
//! a      = X_(n-k) g_pos (1 - g_neg)
//! U      = X_(n-k)
//! ```

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PiecewiseLinearPath, SampledPath};

/// Below this `|gamma|` the quantile and GPD formulas switch to their log/exp limits.
pub const GAMMA_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TopOrderStats {
    pub k: usize,
    /// `X_(n-k:n)`, the `(k+1)`-th largest value.
    pub threshold: f64,
    /// `X_(n-k+1:n) <= ... <= X_(n:n)`.
    pub top: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTriple {
    pub gamma_hat: f64,
    pub a_hat: f64,
    pub u_hat: f64,
    /// The `M_1` component, kept for the lower clamp of the fitted tail.
    pub gamma_pos: f64,
}

/// Returns the `k + 1` largest finite values of `sample`.
pub fn top_order_statistics(sample: &[f64], k: usize) -> Result<TopOrderStats> {
    let mut finite: Vec<f64> = sample.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len();
    if k == 0 || k + 1 > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let cut = n - k - 1;
    finite.select_nth_unstable_by(cut, f64::total_cmp);
    let mut upper = finite.split_off(cut);
    upper.sort_by(f64::total_cmp);
    let threshold = upper[0];
    upper.remove(0);
    Ok(TopOrderStats {
        k,
        threshold,
        top: upper,
    })
}

pub fn moment_estimators(os: &TopOrderStats) -> Result<TailTriple> {
    let thr = os.threshold;
    if !(thr > 0.0) {
        return Err(Error::NonPositiveThreshold(thr));
    }
    let log_thr = thr.ln();
    let (mut m1, mut m2) = (0.0, 0.0);
    for &x in &os.top {
        let l = x.ln() - log_thr;
        m1 += l;
        m2 += l * l;
    }
    let k = os.top.len() as f64;
    m1 /= k;
    m2 /= k;
    // Cauchy-Schwarz gives m1^2 <= m2, with equality iff all log-ratios coincide
    if !(m2 > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let spread = 1.0 - m1 * m1 / m2;
    if !(spread > 1e-12) {
        return Err(Error::DegenerateSample);
    }
    let gamma_pos = m1;
    let gamma_neg = 1.0 - 0.5 / spread;
    Ok(TailTriple {
        gamma_hat: gamma_pos + gamma_neg,
        a_hat: thr * gamma_pos * (1.0 - gamma_neg),
        u_hat: thr,
        gamma_pos,
    })
}

/// Asymptotic variance of `sqrt(k) (gamma_hat - gamma)` for the moment estimator.
pub fn moment_asymptotic_variance(gamma: f64) -> f64 {
    if gamma >= 0.0 {
        1.0 + gamma * gamma
    } else {
        let g = gamma;
        (1.0 - g).powi(2) * (1.0 - 2.0 * g) * (1.0 - g + 6.0 * g * g) / ((1.0 - 3.0 * g) * (1.0 - 4.0 * g))
    }
}

/// Pointwise triples at the grid nodes and their interpolations.
#[derive(Debug, Clone)]
pub struct MarginCurves {
    pub grid: Arc<Grid>,
    pub n: usize,
    pub k: usize,
    pub triples: Vec<TailTriple>,
    pub gamma: PiecewiseLinearPath,
    pub a: PiecewiseLinearPath,
    pub u: PiecewiseLinearPath,
    gamma_pos: PiecewiseLinearPath,
}

impl MarginCurves {
    pub fn from_triples(grid: Arc<Grid>, n: usize, k: usize, triples: Vec<TailTriple>) -> Result<Self> {
        let curve =
            |f: fn(&TailTriple) -> f64| PiecewiseLinearPath::new(Arc::clone(&grid), triples.iter().map(f).collect());
        Ok(Self {
            gamma: curve(|t| t.gamma_hat)?,
            a: curve(|t| t.a_hat)?,
            u: curve(|t| t.u_hat)?,
            gamma_pos: curve(|t| t.gamma_pos)?,
            grid,
            n,
            k,
            triples,
        })
    }

    /// Interpolated triple `(gamma*, a*, U*)` at `t`.
    pub fn at(&self, t: f64) -> TailTriple {
        TailTriple {
            gamma_hat: self.gamma.eval(t),
            a_hat: self.a.eval(t),
            u_hat: self.u.eval(t),
            gamma_pos: self.gamma_pos.eval(t),
        }
    }
}

/// Estimates the triple columnwise at every grid point, then interpolates.
pub fn estimate_margins(paths: &[SampledPath], k: usize) -> Result<MarginCurves> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidArgument("no paths to estimate from".into()))?;
    let grid = Arc::clone(first.grid());
    if let Some(i) = paths
        .iter()
        .position(|p| !Arc::ptr_eq(p.grid(), &grid) && **p.grid() != *grid)
    {
        return Err(Error::InvalidArgument(format!(
            "path {i} is observed on a different grid"
        )));
    }
    let n = paths.len();
    let columns = transpose(paths, grid.len());
    let triples = columns
        .par_chunks(n)
        .zip(grid.points())
        .map(|(column, &t)| {
            top_order_statistics(column, k)
                .and_then(|os| moment_estimators(&os))
                .map_err(|e| e.at_point(t))
        })
        .collect::<Result<Vec<_>>>()?;
    MarginCurves::from_triples(grid, n, k, triples)
}

/// Column-major copy of the path values, in blocks of paths to stay cache friendly.
pub(crate) fn transpose(paths: &[SampledPath], m: usize) -> Vec<f64> {
    const BLOCK: usize = 256;
    let n = paths.len();
    let mut out = vec![0.0; n * m];
    for (b, block) in paths.chunks(BLOCK).enumerate() {
        let base = b * BLOCK;
        for j in 0..m {
            let col = &mut out[j * n + base..j * n + base + block.len()];
            for (slot, p) in col.iter_mut().zip(block) {
                *slot = p.values()[j];
            }
        }
    }
    out
}

/// Extreme quantile `U + a ((np/k)^{-gamma} - 1) / gamma`, exceeded with probability `p`.
pub fn quantile_estimate(triple: &TailTriple, n: usize, k: usize, p: f64) -> Result<f64> {
    let ratio = k as f64 / n as f64;
    if !(p > 0.0 && p <= ratio) {
        return Err(Error::InvalidArgument(format!(
            "exceedance probability {p} must lie in (0, k/n = {ratio}]"
        )));
    }
    if !(triple.a_hat > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale {} must be positive",
            triple.a_hat
        )));
    }
    let scaled = p / ratio;
    let g = triple.gamma_hat;
    let growth = if g.abs() < GAMMA_ZERO_TOL {
        -scaled.ln()
    } else {
        (scaled.powf(-g) - 1.0) / g
    };
    Ok(triple.u_hat + triple.a_hat * growth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurves {
    pub t: Vec<f64>,
    /// Quantile formula applied to the interpolated triple.
    pub from_interpolated: Vec<f64>,
    /// Node quantiles, interpolated.
    pub interpolated: Vec<f64>,
}

pub fn quantile_curves(margins: &MarginCurves, p: f64, eval_points: &[f64]) -> Result<QuantileCurves> {
    let (n, k) = (margins.n, margins.k);
    let nodes = margins
        .triples
        .iter()
        .zip(margins.grid.points())
        .map(|(tr, &t)| quantile_estimate(tr, n, k, p).map_err(|e| e.at_point(t)))
        .collect::<Result<Vec<_>>>()?;
    let node_curve = PiecewiseLinearPath::new(Arc::clone(&margins.grid), nodes)?;
    let from_interpolated = eval_points
        .iter()
        .map(|&t| quantile_estimate(&margins.at(t), n, k, p).map_err(|e| e.at_point(t)))
        .collect::<Result<Vec<_>>>()?;
    let interpolated = eval_points.iter().map(|&t| node_curve.eval(t)).collect();
    Ok(QuantileCurves {
        t: eval_points.to_vec(),
        from_interpolated,
        interpolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GammaCurve, ModelSpec};
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn triple(g: f64, a: f64, u: f64) -> TailTriple {
        TailTriple {
            gamma_hat: g,
            a_hat: a,
            u_hat: u,
            gamma_pos: g.max(0.0),
        }
    }

    #[test]
    fn order_statistic_examples() {
        let os = top_order_statistics(&[5.0, 1.0, 3.0, 2.0, 4.0], 2).unwrap();
        assert_eq!((os.threshold, os.top.clone()), (3.0, vec![4.0, 5.0]));
        let os = top_order_statistics(&[7.0; 6], 2).unwrap();
        assert_eq!((os.threshold, os.top.clone()), (7.0, vec![7.0, 7.0]));
        let sample: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let os = top_order_statistics(&sample, 10).unwrap();
        assert_eq!(os.threshold, 90.0);
        assert_eq!(os.top, (91..=100).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn order_statistic_errors() {
        assert!(matches!(
            top_order_statistics(&[1.0, 2.0], 0),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            top_order_statistics(&[1.0, 2.0], 2),
            Err(Error::KOutOfRange { k: 2, n: 2 })
        ));
        assert!(matches!(
            top_order_statistics(&[1.0, f64::NAN, 3.0], 2),
            Err(Error::KOutOfRange { k: 2, n: 2 })
        ));
    }

    #[test]
    fn moment_estimator_examples() {
        let os = TopOrderStats {
            k: 2,
            threshold: 1.0,
            top: vec![E, E * E],
        };
        let t = moment_estimators(&os).unwrap();
        assert!((t.gamma_pos - 1.5).abs() < 1e-12);
        assert!((t.gamma_hat + 2.5).abs() < 1e-12);
        assert!((t.a_hat - 7.5).abs() < 1e-12);
        assert_eq!(t.u_hat, 1.0);

        let os = TopOrderStats {
            k: 2,
            threshold: 2.0,
            top: vec![2.0 * E, 2.0 * E * E],
        };
        let t = moment_estimators(&os).unwrap();
        assert!((t.gamma_hat + 2.5).abs() < 1e-12);
        assert!((t.a_hat - 15.0).abs() < 1e-12);
        assert_eq!(t.u_hat, 2.0);

        let flat = TopOrderStats {
            k: 2,
            threshold: 1.0,
            top: vec![1.0, 1.0],
        };
        assert!(matches!(moment_estimators(&flat), Err(Error::DegenerateSample)));
        // equal log-ratios above the threshold are degenerate too
        let equal = TopOrderStats {
            k: 3,
            threshold: 1.0,
            top: vec![3.0, 3.0, 3.0],
        };
        assert!(matches!(moment_estimators(&equal), Err(Error::DegenerateSample)));
        let neg = TopOrderStats {
            k: 2,
            threshold: -1.0,
            top: vec![1.0, 2.0],
        };
        assert!(matches!(moment_estimators(&neg), Err(Error::NonPositiveThreshold(_))));
    }

    #[test]
    fn variance_formula_is_continuous_at_zero() {
        assert_eq!(moment_asymptotic_variance(0.0), 1.0);
        assert!((moment_asymptotic_variance(-1e-9) - 1.0).abs() < 1e-6);
        assert!((moment_asymptotic_variance(0.5) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn quantile_examples() {
        let x = quantile_estimate(&triple(0.5, 2.0, 10.0), 10_000, 100, 0.0001).unwrap();
        assert!((x - 46.0).abs() < 1e-12);
        let x = quantile_estimate(&triple(0.0, 1.0, 0.0), 1000, 100, 0.1 * (-1.0f64).exp()).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
        let x = quantile_estimate(&triple(0.3, 1.7, 4.2), 1000, 50, 0.05).unwrap();
        assert_eq!(x, 4.2);
        assert!(quantile_estimate(&triple(0.3, 1.7, 4.2), 1000, 50, 0.06).is_err());
        assert!(quantile_estimate(&triple(0.3, 1.7, 4.2), 1000, 50, 0.0).is_err());
        // near-zero gamma agrees with the log limit
        let a = quantile_estimate(&triple(1e-9, 1.0, 0.0), 1000, 100, 0.001).unwrap();
        let b = quantile_estimate(&triple(1e-6, 1.0, 0.0), 1000, 100, 0.001).unwrap();
        assert!((a - b).abs() < 1e-4);
    }

    fn two_node_margins(g0: f64, g1: f64) -> MarginCurves {
        let grid = Arc::new(Grid::new(vec![0.0, 1.0]).unwrap());
        MarginCurves::from_triples(grid, 10_000, 100, vec![triple(g0, 2.0, 10.0), triple(g1, 2.0, 10.0)]).unwrap()
    }

    #[test]
    fn interpolated_gamma_at_midpoint() {
        let m = two_node_margins(0.4, 0.8);
        assert!((m.at(0.5).gamma_hat - 0.6).abs() < 1e-15);
    }

    #[test]
    fn quantile_curve_compositions() {
        let p = 0.0001;
        let m = two_node_margins(0.4, 0.8);
        let q = quantile_curves(&m, p, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(q.from_interpolated[0], q.interpolated[0]);
        assert_eq!(q.from_interpolated[2], q.interpolated[2]);
        // independent hand evaluation at the midpoint
        let x = |g: f64| 10.0 + 2.0 * (0.01f64.powf(-g) - 1.0) / g;
        assert!((q.from_interpolated[1] - x(0.6)).abs() < 1e-9);
        assert!((q.interpolated[1] - 0.5 * (x(0.4) + x(0.8))).abs() < 1e-9);
        assert!((q.from_interpolated[1] - q.interpolated[1]).abs() > 1.0);

        let flat = two_node_margins(0.4, 0.4);
        let q = quantile_curves(&flat, p, &[0.0, 0.3, 0.9]).unwrap();
        for (a, b) in q.from_interpolated.iter().zip(&q.interpolated) {
            assert!((a - b).abs() < 1e-12);
            assert!((a - q.interpolated[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_paths_give_constant_curves() {
        let grid = Arc::new(Grid::uniform(4).unwrap());
        let paths: Vec<SampledPath> = [1.5, 7.0, 3.0]
            .iter()
            .map(|&v| SampledPath::new(grid.clone(), vec![v; 5]).unwrap())
            .collect();
        let m = estimate_margins(&paths, 1);
        // k = 1 leaves one log-ratio, which is always degenerate
        assert!(matches!(m.unwrap_err().root(), Error::DegenerateSample));

        let paths: Vec<SampledPath> = [1.5, 7.0, 3.0, 2.0]
            .iter()
            .map(|&v| SampledPath::new(grid.clone(), vec![v; 5]).unwrap())
            .collect();
        let m = estimate_margins(&paths, 2).unwrap();
        let single = moment_estimators(&top_order_statistics(&[1.5, 7.0, 3.0, 2.0], 2).unwrap()).unwrap();
        for t in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert_eq!(m.at(t), single);
        }
    }

    #[test]
    fn degenerate_column_is_tagged_with_location() {
        let grid = Arc::new(Grid::new(vec![0.25, 0.75]).unwrap());
        let paths: Vec<SampledPath> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&v| SampledPath::new(grid.clone(), vec![v, 5.0]).unwrap())
            .collect();
        match estimate_margins(&paths, 2) {
            Err(Error::AtGridPoint { t, source }) => {
                assert_eq!(t, 0.75);
                assert!(matches!(*source, Error::DegenerateSample));
            }
            other => panic!("expected a tagged degenerate-sample error, got {other:?}"),
        }
    }

    #[test]
    fn pareto_power_constant_gamma_columns_share_ranks() {
        let model = ModelSpec::ParetoPower {
            gamma: GammaCurve::constant(0.5),
        };
        let grid = Arc::new(Grid::uniform(6).unwrap());
        let paths = model.simulate(grid.clone(), 500, 3).unwrap();
        let m = estimate_margins(&paths, 25).unwrap();
        let g0 = m.triples[0].gamma_hat;
        for tr in &m.triples {
            assert!((tr.gamma_hat - g0).abs() < 1e-9);
        }
    }

    #[test]
    fn gamma_pos_is_hill_statistic_scaled() {
        // x = v^g gives log-ratios g * log(v / v_thr): M_1 is g times the Hill statistic of v
        let v = [1.3, 2.2, 9.1, 4.4, 1.01, 17.0, 3.3, 6.0];
        let g = 0.37;
        let x: Vec<f64> = v.iter().map(|vi: &f64| vi.powf(g)).collect();
        let k = 4;
        let tv = top_order_statistics(&v, k).unwrap();
        let hill = tv.top.iter().map(|vi| (vi / tv.threshold).ln()).sum::<f64>() / k as f64;
        let t = moment_estimators(&top_order_statistics(&x, k).unwrap()).unwrap();
        assert!((t.gamma_pos - g * hill).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_equivariance(sample in prop::collection::vec(0.01f64..1e3, 10..60), c in 1e-3f64..1e3, kfrac in 0.1f64..0.8) {
            let k = ((sample.len() as f64 * kfrac) as usize).clamp(2, sample.len() - 1);
            let scaled: Vec<f64> = sample.iter().map(|x| c * x).collect();
            let base = moment_estimators(&top_order_statistics(&sample, k).unwrap());
            let other = moment_estimators(&top_order_statistics(&scaled, k).unwrap());
            if let (Ok(b), Ok(o)) = (base, other) {
                prop_assert!((b.gamma_hat - o.gamma_hat).abs() <= 1e-9 * (1.0 + b.gamma_hat.abs()));
                prop_assert!((o.a_hat / (c * b.a_hat) - 1.0).abs() < 1e-9);
                prop_assert_eq!(o.u_hat, c * b.u_hat);
            }
        }

        #[test]
        fn gamma_components_are_bounded(sample in prop::collection::vec(0.01f64..1e3, 5..60)) {
            let k = sample.len() / 2;
            if let Ok(t) = moment_estimators(&top_order_statistics(&sample, k).unwrap()) {
                prop_assert!(t.gamma_pos >= 0.0);
                prop_assert!(t.gamma_hat - t.gamma_pos <= 0.5);
                prop_assert!(t.a_hat > 0.0);
            }
        }
    }
}
