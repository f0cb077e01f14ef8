//! Extreme-value estimation for continuous processes observed on discrete grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod error;
pub mod expmeasure;
pub mod grid;
pub mod harness;
pub mod io;
pub mod margins;
pub mod models;
pub mod seed;
pub mod standardize;

pub use conditions::{
    check_lemma31, check_m, check_smoothness, estimate_s, recommend_mesh, recommend_mesh_for, ConditionReport,
    LambdaMode, MeshRecommendation,
};
pub use error::{Error, Result};
pub use expmeasure::{
    dc_distance, nu_hat, nu_oracle_monte_carlo, reference_complete_dependence, restrict, PointMeasure,
    ReferenceMeasure, TestSet, TestSetKind,
};
pub use grid::{Grid, PiecewiseLinearPath, SampledPath, Stencil};
pub use harness::{run_experiment, ExperimentConfig, ExperimentResult, GridRule, KRule, Targets};
pub use margins::{
    estimate_margins, moment_estimators, quantile_curves, quantile_estimate, top_order_statistics, MarginCurves,
    QuantileCurves, TailTriple, TopOrderStats,
};
pub use models::{counterexample_error, CovarianceSpec, GammaCurve, Jump, Marginals, ModelSpec, Simulator};
pub use seed::derive_seed;
pub use standardize::{scaled_atoms, xi_hat, xi_hat_value, xi_true, StandardizedPath};
