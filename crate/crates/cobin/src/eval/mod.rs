//! Model evaluation: data generators, predictive scores, chain
//! diagnostics, residual checks and the desk-scale simulation studies.
//!
//! The pieces compose into two workflows. For a single fitted model,
//! [`quantile_residuals_cobin`] / [`quantile_residuals_micobin`] map the
//! observations through the fitted CDF onto the normal scale and
//! [`shapiro_wilk`] tests the result, while [`waic`] and [`split_rhat`]
//! score and police the chains that produced the fit. For repeated
//! experiments, [`run_table1`] measures slope bias/RMSE under correctly
//! and incorrectly specified response families, and [`run_table2`] fits
//! both spatial mixed models to held-out data and compares predictive
//! scores ([`negtestll`], [`mspe`]) and sampling efficiency
//! ([`multivariate_ess`]).

mod generate;
mod metrics;
mod normal;
mod residuals;
mod shapiro;
mod tables;

pub use generate::{
    generate, DataGeneratorSpec, GeneratedData, GeneratorFamily, SpatialSpec,
};
pub use metrics::{
    log_density_draws, max_split_rhat, mspe, multivariate_ess, negtestll, split_rhat, waic,
    MetricReport, Waic,
};
pub use residuals::{quantile_residuals_cobin, quantile_residuals_micobin};
pub use shapiro::{shapiro_wilk, ShapiroWilk};
pub use tables::{
    run_table1, run_table2, SpatialFitMetrics, SpatialModel, Table1Cell, Table1Config,
    Table2Config, Table2Row,
};
