use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Covariance kernel of the centered Gaussian factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CovarianceSpec {
    /// `variance * exp(-|s - t| / length)`.
    Exponential { variance: f64, length: f64 },
    /// `variance / 2 * (s^2H + t^2H - |s - t|^2H)`.
    FractionalBrownian { variance: f64, hurst: f64 },
}

impl CovarianceSpec {
    pub fn kernel(&self, s: f64, t: f64) -> f64 {
        match *self {
            CovarianceSpec::Exponential { variance, length } => variance * (-(s - t).abs() / length).exp(),
            CovarianceSpec::FractionalBrownian { variance, hurst } => {
                let h2 = 2.0 * hurst;
                0.5 * variance * (s.abs().powf(h2) + t.abs().powf(h2) - (s - t).abs().powf(h2))
            }
        }
    }

    /// `sigma_t^2 = Var(Z_t)`.
    pub fn variance_at(&self, t: f64) -> f64 {
        self.kernel(t, t)
    }

    /// `(alpha_1, C_1)` with `E(Z_s - Z_t)^2 <= C_1 |s - t|^alpha_1`.
    pub fn increment_bound(&self) -> (f64, f64) {
        match *self {
            CovarianceSpec::Exponential { variance, length } => (1.0, 2.0 * variance / length),
            CovarianceSpec::FractionalBrownian { variance, hurst } => (2.0 * hurst, variance),
        }
    }

    /// `E(Z_s - Z_t)^2` implied by the kernel.
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        self.kernel(s, s) + self.kernel(t, t) - 2.0 * self.kernel(s, t)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            CovarianceSpec::Exponential { variance, length } => {
                if !(variance >= 0.0) || !(length > 0.0) {
                    return Err(Error::Model(format!(
                        "exponential covariance needs variance >= 0 and length > 0 (got {variance}, {length})"
                    )));
                }
            }
            CovarianceSpec::FractionalBrownian { variance, hurst } => {
                if !(variance >= 0.0) || !(hurst > 0.0 && hurst <= 1.0) {
                    return Err(Error::Model(format!(
                        "fractional Brownian covariance needs variance >= 0 and 0 < H <= 1 (got {variance}, {hurst})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn factor(&self, grid: &Grid) -> Result<GaussianFactor> {
        let pts = grid.points();
        match *self {
            CovarianceSpec::Exponential { variance, .. } | CovarianceSpec::FractionalBrownian { variance, .. }
                if variance == 0.0 =>
            {
                Ok(GaussianFactor::Zero)
            }
            CovarianceSpec::Exponential { variance, length } => {
                // The exponential kernel is Markov: its Cholesky factor acts as an AR(1) recursion.
                let sd = variance.sqrt();
                let mut rho = Vec::with_capacity(pts.len());
                let mut innov = Vec::with_capacity(pts.len());
                rho.push(0.0);
                innov.push(sd);
                for w in pts.windows(2) {
                    let r = (-(w[1] - w[0]) / length).exp();
                    rho.push(r);
                    innov.push(sd * (1.0 - r * r).max(0.0).sqrt());
                }
                Ok(GaussianFactor::Markov { rho, innov })
            }
            CovarianceSpec::FractionalBrownian { .. } => {
                let m = pts.len();
                let cov = DMatrix::from_fn(m, m, |i, j| self.kernel(pts[i], pts[j]));
                let scale = cov.trace() / m as f64;
                let mut rel = 1e-10;
                loop {
                    let jitter = rel * scale;
                    let mut a = cov.clone();
                    for i in 0..m {
                        a[(i, i)] += jitter;
                    }
                    if let Some(ch) = a.cholesky() {
                        return Ok(GaussianFactor::Dense(ch.unpack()));
                    }
                    if rel >= 1e-6 {
                        return Err(Error::Factorization { jitter });
                    }
                    rel *= 10.0;
                }
            }
        }
    }
}

/// Lower-triangular square root `L` of the grid covariance, applied as `Z = L eps`.
#[derive(Debug, Clone)]
pub(crate) enum GaussianFactor {
    Zero,
    Markov { rho: Vec<f64>, innov: Vec<f64> },
    Dense(DMatrix<f64>),
}

impl GaussianFactor {
    /// Overwrites `noise` (iid standard normals) with the correlated path.
    pub(crate) fn apply(&self, noise: &mut [f64]) {
        match self {
            GaussianFactor::Zero => noise.iter_mut().for_each(|z| *z = 0.0),
            GaussianFactor::Markov { rho, innov } => {
                let mut prev = 0.0;
                for ((z, r), s) in noise.iter_mut().zip(rho).zip(innov) {
                    prev = r * prev + s * *z;
                    *z = prev;
                }
            }
            GaussianFactor::Dense(l) => {
                // in place from the bottom row up, since L is lower triangular
                let m = noise.len();
                for i in (0..m).rev() {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * noise[j];
                    }
                    noise[i] = acc;
                }
            }
        }
    }
}

impl std::str::FromStr for CovarianceSpec {
    type Err = Error;

    /// `exp:VARIANCE,LENGTH` or `fbm:VARIANCE,HURST`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("covariance spec `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 2 {
            return Err(Error::Parse(format!("covariance spec `{s}` expects two numbers")));
        }
        match kind {
            "exp" | "exponential" => Ok(CovarianceSpec::Exponential {
                variance: nums[0],
                length: nums[1],
            }),
            "fbm" => Ok(CovarianceSpec::FractionalBrownian {
                variance: nums[0],
                hurst: nums[1],
            }),
            other => Err(Error::Parse(format!("unknown covariance family `{other}`"))),
        }
    }
}
