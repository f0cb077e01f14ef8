//! Synthetic process families with closed-form marginals.
//!
//! * `ParetoPower`: `X_t = V^{gamma_t}` with `V` standard Pareto. Tails are exactly
//!   generalized Pareto above every level, and `1 / (1 - F_t(X_t)) = V` for all `t`.
//! * `ExpGaussian`: `X_t = Y^{gamma_t} exp(Z_t)` with `Y` standard Pareto and `Z`
//!   an independent centered Gaussian process.
//! * `CompleteDependence`: `X_t = Z_0^{gamma_t}` with `Z_0` unit Fréchet.

mod covariance;
mod gamma;

use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use covariance::CovarianceSpec;
use covariance::GaussianFactor;
pub use gamma::{GammaCurve, Jump};

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledPath};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    ParetoPower {
        gamma: GammaCurve,
    },
    ExpGaussian {
        gamma: GammaCurve,
        covariance: CovarianceSpec,
    },
    #[serde(rename = "complete-dependence")]
    CompleteDependence {
        gamma: GammaCurve,
    },
}

/// `(U_t(y), a_t(y), gamma_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginals {
    pub u: f64,
    pub a: f64,
    pub gamma: f64,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::ParetoPower { .. } => "pareto-power",
            ModelSpec::ExpGaussian { .. } => "exp-gaussian",
            ModelSpec::CompleteDependence { .. } => "complete-dependence",
        }
    }

    pub fn gamma_curve(&self) -> &GammaCurve {
        match self {
            ModelSpec::ParetoPower { gamma }
            | ModelSpec::ExpGaussian { gamma, .. }
            | ModelSpec::CompleteDependence { gamma } => gamma,
        }
    }

    pub fn gamma(&self, t: f64) -> f64 {
        self.gamma_curve().value(t)
    }

    /// Copy with level-dependent gamma parameters fixed for `n/k`.
    pub fn resolve(&self, n: usize, k: usize) -> Self {
        let level = n as f64 / k as f64;
        match self {
            ModelSpec::ParetoPower { gamma } => ModelSpec::ParetoPower {
                gamma: gamma.resolve(level),
            },
            ModelSpec::ExpGaussian { gamma, covariance } => ModelSpec::ExpGaussian {
                gamma: gamma.resolve(level),
                covariance: covariance.clone(),
            },
            ModelSpec::CompleteDependence { gamma } => ModelSpec::CompleteDependence {
                gamma: gamma.resolve(level),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gamma_curve().validate_positive()?;
        if let ModelSpec::ExpGaussian { covariance, .. } = self {
            covariance.validate()?;
        }
        Ok(())
    }

    /// `Var(Z_t)` of the Gaussian factor, zero for the other families.
    pub fn gaussian_variance(&self, t: f64) -> f64 {
        match self {
            ModelSpec::ExpGaussian { covariance, .. } => covariance.variance_at(t),
            _ => 0.0,
        }
    }

    /// Exact `P{X_t > x}`.
    pub fn survival(&self, t: f64, x: f64) -> f64 {
        let g = self.gamma(t);
        match self {
            ModelSpec::ParetoPower { .. } => pareto_power_survival(g, x),
            ModelSpec::CompleteDependence { .. } => {
                if x <= 0.0 {
                    1.0
                } else {
                    -(-x.powf(-1.0 / g)).exp_m1()
                }
            }
            ModelSpec::ExpGaussian { covariance, .. } => {
                let var = covariance.variance_at(t);
                if var <= 0.0 {
                    return pareto_power_survival(g, x);
                }
                if x <= 0.0 {
                    return 1.0;
                }
                let sd = var.sqrt();
                let l = x.ln();
                let body = (-l / g + var / (2.0 * g * g)).exp() * normal_cdf(l / sd - sd / g);
                body + normal_cdf(-l / sd)
            }
        }
    }

    /// Closed-form `U_t(y)`, `a_t(y)` and `gamma_t` for `y > 1`. For
    /// `ExpGaussian` this is the asymptotic form `U_t(y) = c_t y^gamma_t` with
    /// `c_t = exp(sigma_t^2 / (2 gamma_t))` and `a_t = gamma_t U_t`.
    pub fn true_marginals(&self, t: f64, y: f64) -> Result<Marginals> {
        if !(y > 1.0) {
            return Err(Error::InvalidArgument(format!("marginal level y = {y} must exceed 1")));
        }
        let g = self.gamma(t);
        if !(g > 0.0) {
            return Err(Error::Model(format!("gamma_t = {g} at t = {t} must be positive")));
        }
        let u = match self {
            ModelSpec::ParetoPower { .. } => y.powf(g),
            ModelSpec::ExpGaussian { covariance, .. } => {
                let c = (covariance.variance_at(t) / (2.0 * g)).exp();
                c * y.powf(g)
            }
            ModelSpec::CompleteDependence { .. } => (-(-1.0 / y).ln_1p()).powf(-g),
        };
        Ok(Marginals { u, a: g * u, gamma: g })
    }

    /// Exact quantile `U_t(y) = F_t^{-1}(1 - 1/y)`, by bisection on the log scale
    /// where no closed form exists.
    pub fn exact_quantile(&self, t: f64, y: f64) -> Result<f64> {
        if !(y > 1.0) {
            return Err(Error::InvalidArgument(format!("quantile level y = {y} must exceed 1")));
        }
        match self {
            ModelSpec::ParetoPower { .. } | ModelSpec::CompleteDependence { .. } => {
                self.true_marginals(t, y).map(|m| m.u)
            }
            ModelSpec::ExpGaussian { .. } => {
                let target = 1.0 / y;
                let guess = self.true_marginals(t, y)?.u.max(1e-300);
                let (mut lo, mut hi) = (guess.ln() - 1.0, guess.ln() + 1.0);
                while self.survival(t, lo.exp()) < target {
                    lo -= 2.0;
                    if lo < -700.0 {
                        return Err(Error::Model("quantile bracket underflow".into()));
                    }
                }
                while self.survival(t, hi.exp()) > target {
                    hi += 2.0;
                    if hi > 700.0 {
                        return Err(Error::Model("quantile bracket overflow".into()));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.survival(t, mid.exp()) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                Ok((0.5 * (lo + hi)).exp())
            }
        }
    }

    pub fn simulator(&self, grid: Arc<Grid>) -> Result<Simulator> {
        self.validate()?;
        let gammas = grid.points().iter().map(|&t| self.gamma(t)).collect();
        let factor = match self {
            ModelSpec::ExpGaussian { covariance, .. } => Some(covariance.factor(&grid)?),
            _ => None,
        };
        Ok(Simulator {
            model: self.clone(),
            grid,
            gammas,
            factor,
        })
    }

    /// `n` iid paths; path `i` is driven by `derive_seed(seed, 0, 0, i)`.
    pub fn simulate(&self, grid: Arc<Grid>, n: usize, seed: u64) -> Result<Vec<SampledPath>> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one path".into()));
        }
        let sim = self.simulator(grid)?;
        Ok(sim.paths(n, |i| derive_seed(seed, 0, 0, i as u64)))
    }
}

fn pareto_power_survival(g: f64, x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        x.powf(-1.0 / g)
    }
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One simulated path together with its scalar driver
/// (`V`, `Y` or `Z_0`, depending on the family).
#[derive(Debug, Clone)]
pub struct Draw {
    pub path: SampledPath,
    pub driver: f64,
}

/// Per-grid sampling state; the Gaussian factor is computed once and shared.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: ModelSpec,
    grid: Arc<Grid>,
    gammas: Vec<f64>,
    factor: Option<GaussianFactor>,
}

impl Simulator {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn draw(&self, seed: u64) -> Draw {
        let mut rng = rng(seed);
        let u: f64 = rng.sample(Open01);
        let (driver, log_driver) = match self.model {
            ModelSpec::CompleteDependence { .. } => {
                let z = -1.0 / u.ln();
                (z, z.ln())
            }
            _ => (1.0 / u, -u.ln()),
        };
        let mut values: Vec<f64> = match &self.factor {
            Some(factor) => {
                let mut z: Vec<f64> = (0..self.gammas.len()).map(|_| rng.sample(StandardNormal)).collect();
                factor.apply(&mut z);
                z
            }
            None => vec![0.0; self.gammas.len()],
        };
        for (v, g) in values.iter_mut().zip(&self.gammas) {
            *v = (g * log_driver + *v).exp();
        }
        let path = SampledPath::new(Arc::clone(&self.grid), values).expect("simulated values are finite");
        Draw { path, driver }
    }

    pub fn paths<F>(&self, n: usize, seed_of: F) -> Vec<SampledPath>
    where
        F: Fn(usize) -> u64 + Sync,
    {
        (0..n).into_par_iter().map(|i| self.draw(seed_of(i)).path).collect()
    }

    pub fn draws<F>(&self, n: usize, seed_of: F) -> Vec<Draw>
    where
        F: Fn(usize) -> u64 + Sync,
    {
        (0..n).into_par_iter().map(|i| self.draw(seed_of(i))).collect()
    }
}

/// Standardized error `(U*_t - U_t(n/k)) / a_t(n/k)` of the interpolated
/// location estimator for `ParetoPower` data, in closed form given the
/// `(k+1)`-th largest driver `V_{n-k:n}`:
///
/// `(1/g_t) * sum_j w_j [ ((k/n) V)^{g_j} (k/n)^{g_t - g_j} - 1 ]`
///
/// over the interpolation stencil of `t`. Outside the node range the single
/// nearest node carries weight one.
pub fn counterexample_error(gamma: &GammaCurve, grid: &Grid, n: usize, k: usize, t: f64, v_threshold: f64) -> f64 {
    let ratio = k as f64 / n as f64;
    let scaled = ratio * v_threshold;
    let gt = gamma.value(t);
    let pts = grid.points();
    let sum: f64 = grid
        .stencil(t)
        .weights()
        .iter()
        .filter(|(_, w)| *w != 0.0)
        .map(|&(j, w)| {
            let gj = gamma.value(pts[j]);
            w * (scaled.powf(gj) * ratio.powf(gt - gj) - 1.0)
        })
        .sum();
    sum / gt
}
