//! Marginal standardization to the standard Pareto scale, with the true
//! distribution functions or with fitted generalized Pareto tails.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, PiecewiseLinearPath, SampledPath};
use crate::margins::{MarginCurves, TailTriple, GAMMA_ZERO_TOL};
use crate::models::ModelSpec;

/// Relative floor and cap applied to `xi_hat`, in units of `n/k`.
pub const XI_FLOOR: f64 = 1e-12;
pub const XI_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPath {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    /// Whether `values` already carry the factor `k/n`.
    pub scaled: bool,
}

impl StandardizedPath {
    /// Multiplies by `k/n` once; already scaled paths are returned unchanged.
    pub fn scale(mut self, n: usize, k: usize) -> Self {
        if !self.scaled {
            let r = k as f64 / n as f64;
            self.values.iter_mut().for_each(|v| *v *= r);
            self.scaled = true;
        }
        self
    }

    pub fn interpolate(&self) -> PiecewiseLinearPath {
        PiecewiseLinearPath::new(Arc::clone(&self.grid), self.values.clone())
            .expect("standardized values match their grid")
    }
}

/// `xi_t = 1 / (1 - F_t(X_t))` at every grid point.
pub fn xi_true(model: &ModelSpec, path: &SampledPath) -> Result<StandardizedPath> {
    let values = path
        .grid()
        .points()
        .iter()
        .zip(path.values())
        .map(|(&t, &x)| {
            let s = model.survival(t, x);
            if s > 0.0 {
                Ok(1.0 / s)
            } else {
                Err(Error::SupportBoundary { t, x })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StandardizedPath {
        grid: Arc::clone(path.grid()),
        values,
        scaled: false,
    })
}

/// `(n/k) (1 + g max((x - U)/a, -1/g_pos))^{1/g}` for a single fitted tail.
///
/// Values below the clamp are floored at `XI_FLOOR * n/k`; for `g < 0`, points
/// past the fitted endpoint are capped at `XI_CAP * n/k`.
pub fn xi_hat_value(triple: &TailTriple, x: f64, n: usize, k: usize) -> Result<f64> {
    if !(triple.a_hat > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale {} must be positive",
            triple.a_hat
        )));
    }
    let level = n as f64 / k as f64;
    let mut z = (x - triple.u_hat) / triple.a_hat;
    if triple.gamma_pos > 0.0 {
        z = z.max(-1.0 / triple.gamma_pos);
    }
    let g = triple.gamma_hat;
    let tail = if g.abs() < GAMMA_ZERO_TOL {
        z.exp()
    } else {
        let base = 1.0 + g * z;
        if base > 0.0 {
            base.powf(1.0 / g)
        } else if g < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    Ok(level * tail.clamp(XI_FLOOR, XI_CAP))
}

/// Fitted standardization at the grid nodes, using the node triples.
pub fn xi_hat(margins: &MarginCurves, path: &SampledPath, n: usize, k: usize) -> Result<StandardizedPath> {
    let grid = path.grid();
    if !Arc::ptr_eq(grid, &margins.grid) && **grid != *margins.grid {
        return Err(Error::InvalidArgument(
            "path and margin estimates live on different grids".into(),
        ));
    }
    let values = margins
        .triples
        .iter()
        .zip(path.values())
        .zip(grid.points())
        .map(|((tr, &x), &t)| xi_hat_value(tr, x, n, k).map_err(|e| e.at_point(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StandardizedPath {
        grid: Arc::clone(grid),
        values,
        scaled: false,
    })
}

pub fn xi_hat_all(margins: &MarginCurves, paths: &[SampledPath], n: usize, k: usize) -> Result<Vec<StandardizedPath>> {
    paths.par_iter().map(|p| xi_hat(margins, p, n, k)).collect()
}

pub fn xi_true_all(model: &ModelSpec, paths: &[SampledPath]) -> Result<Vec<StandardizedPath>> {
    paths.par_iter().map(|p| xi_true(model, p)).collect()
}

/// Atoms `k <xi^(i)> / n` of the exponent-measure estimator.
pub fn scaled_atoms(paths: Vec<StandardizedPath>, n: usize, k: usize) -> Vec<PiecewiseLinearPath> {
    paths
        .into_par_iter()
        .map(|p| {
            let p = p.scale(n, k);
            PiecewiseLinearPath::new(p.grid, p.values).expect("standardized values match their grid")
        })
        .collect()
}
