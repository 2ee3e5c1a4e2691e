//! Blocked Gibbs samplers for continuous-binomial regression.
//!
//! The augmentation that powers everything here: conditionally on a
//! Kolmogorov-Gamma variable `kappa_i` with tilt `eta_i`, the contribution of
//! observation `i` reduces to a Gaussian kernel in the linear predictor,
//!
//! ```text
//! lambda_i (eta_i y_i - B(eta_i))  <->  y~_i | kappa_i ~ N(eta_i, 1 / kappa_i),
//! y~_i = lambda_i (y_i - 1/2) / kappa_i,
//! ```
//!
//! so with a Gaussian prior on the coefficients every sweep alternates exact
//! conditional draws: integer dispersion from a truncated categorical,
//! augmentation weights from the Kolmogorov-Gamma sampler, and coefficients
//! from a multivariate normal. No tuning, no Metropolis step for the
//! regression block, and every conditional is sampled exactly.
//!
//! * [`sample_cobin_regression`] — fixed-effects model with a single shared
//!   integer dispersion.
//! * [`sample_micobin_regression`] — fixed-effects model with per-observation
//!   dispersion mixed over a shifted negative-binomial, which both robustifies
//!   the fit and puts positive density on boundary observations.
//! * [`mixed::sample_cobin_mixed`] / [`mixed::sample_micobin_mixed`] — add a
//!   Gaussian random effect (spatial kernel or sparse precision) with a
//!   partially collapsed coefficient step and a Metropolis step for the
//!   random-effect variance.
//! * [`mixed::predict_spatial`] — posterior predictive draws of the linear
//!   predictor at new locations for kernel models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dist::cumulant_value;
use crate::dist::log_irwin_hall_scaled;
use crate::{Error, Result};
use crate::fit::{BetaPrior, LambdaPrior};
use crate::kg::KgEnvelope;

mod fixed;
pub mod mixed;
pub mod sparse;

pub use fixed::{sample_cobin_regression, sample_micobin_regression};
pub use mixed::{
    predict_spatial, sample_cobin_mixed, sample_micobin_mixed, ExponentialKernel, MixedOptions,
    MixedPriors, PredictiveDraws, RandomEffectDesign, RandomEffectStructure, SparsePrecision,
};
pub use sparse::{SparseLdl, SparseSymmetric};

/// Chain length controls shared by every sampler in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsOptions {
    /// Total Gibbs sweeps, including burn-in.
    pub iterations: usize,
    /// Leading sweeps discarded from the output.
    pub burnin: usize,
    /// Envelope configuration for the Kolmogorov-Gamma rejection sampler.
    pub envelope: KgEnvelope,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            iterations: 6000,
            burnin: 1000,
            envelope: KgEnvelope::default(),
        }
    }
}

impl GibbsOptions {
    pub(crate) fn validate(&self) -> Result<usize> {
        if self.iterations == 0 || self.burnin >= self.iterations {
            return Err(Error::invalid(format!(
                "need burnin < iterations, got burnin = {} and iterations = {}",
                self.burnin, self.iterations
            )));
        }
        Ok(self.iterations - self.burnin)
    }
}

/// Beta prior on the dispersion-mixing probability `psi`, together with the
/// truncation of the per-observation dispersion updates.
///
/// The shifted negative-binomial mixing weights are conjugate to a
/// `Beta(a, b)` prior: given dispersions `lambda_1..lambda_n`, the conditional
/// is `Beta(a + 2n, b - n + sum lambda_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiPrior {
    /// First Beta shape parameter (> 0).
    pub a: f64,
    /// Second Beta shape parameter (> 0).
    pub b: f64,
    /// Upper limit of the per-observation dispersion grid (>= 1).
    pub truncation: u32,
}

impl Default for PsiPrior {
    fn default() -> Self {
        Self {
            a: 2.0,
            b: 2.0,
            truncation: LambdaPrior::DEFAULT_TRUNCATION,
        }
    }
}

impl PsiPrior {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite() && self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!(
                "psi prior needs positive finite shapes, got ({}, {})",
                self.a, self.b
            )));
        }
        if self.truncation == 0 {
            return Err(Error::invalid("psi prior truncation must be >= 1"));
        }
        Ok(())
    }
}

/// Prior bundle for the fixed-effects samplers.
///
/// Each sampler reads the pieces it needs: the coefficient prior always, the
/// integer-dispersion prior for the shared-dispersion model, the mixing prior
/// for the per-observation model.
#[derive(Debug, Clone)]
pub struct RegressionPriors {
    /// Gaussian prior on the regression coefficients.
    pub beta: BetaPrior,
    /// Truncated prior on the shared integer dispersion.
    pub lambda: LambdaPrior,
    /// Beta prior on the dispersion-mixing probability.
    pub psi: PsiPrior,
}

impl RegressionPriors {
    /// Weakly informative default: centred Gaussian coefficients with
    /// standard deviation 100, the standard dispersion prior truncated at 70,
    /// and `Beta(2, 2)` mixing.
    pub fn standard(coefficients: usize) -> Result<Self> {
        Ok(Self {
            beta: BetaPrior::isotropic(coefficients, 100.0)?,
            lambda: LambdaPrior::default(),
            psi: PsiPrior::default(),
        })
    }
}

/// Dispersion draws, one entry per kept sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum DispersionDraws {
    /// Shared integer dispersion of the single-dispersion model.
    Lambda(Vec<u32>),
    /// Mixing probability of the per-observation dispersion model.
    Psi(Vec<f64>),
}

impl DispersionDraws {
    /// Number of kept sweeps.
    pub fn len(&self) -> usize {
        match self {
            DispersionDraws::Lambda(v) => v.len(),
            DispersionDraws::Psi(v) => v.len(),
        }
    }

    /// True when no sweeps were kept.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Posterior median of the integer dispersion, if this is a
    /// shared-dispersion chain.
    pub fn lambda_median(&self) -> Option<u32> {
        match self {
            DispersionDraws::Lambda(v) if !v.is_empty() => {
                let mut sorted = v.clone();
                sorted.sort_unstable();
                Some(sorted[sorted.len() / 2])
            }
            _ => None,
        }
    }

    /// Posterior mean of the mixing probability, if this is a
    /// per-observation-dispersion chain.
    pub fn psi_mean(&self) -> Option<f64> {
        match self {
            DispersionDraws::Psi(v) if !v.is_empty() => {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
            _ => None,
        }
    }
}

/// Identifies where a chain came from, for reproducibility records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainProvenance {
    /// Seed of the random number generator that produced the chain.
    pub seed: u64,
    /// Chain index when several chains are run from one seed.
    pub chain: u64,
    /// Number of discarded burn-in sweeps.
    pub burnin: usize,
}

/// Posterior draws from one Gibbs chain.
///
/// Rows index kept sweeps. Fixed-effects samplers leave the random-effect
/// fields empty; mixed samplers fill them.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    /// Regression coefficients, one row per kept sweep.
    pub beta: DMatrix<f64>,
    /// Dispersion draws matching the model family.
    pub dispersion: DispersionDraws,
    /// Random-effect draws, one row per kept sweep (mixed models only).
    pub random_effects: Option<DMatrix<f64>>,
    /// Random-effect variance draws (mixed models only).
    pub random_effect_variance: Option<Vec<f64>>,
    /// Origin of the chain, when the caller recorded it.
    pub provenance: Option<ChainProvenance>,
}

impl PosteriorDraws {
    /// Number of kept sweeps.
    pub fn kept(&self) -> usize {
        self.beta.nrows()
    }

    /// Posterior means of the coefficients.
    pub fn beta_mean(&self) -> DVector<f64> {
        let m = self.kept() as f64;
        DVector::from_fn(self.beta.ncols(), |j, _| self.beta.column(j).sum() / m)
    }

    /// Posterior standard deviations of the coefficients.
    pub fn beta_sd(&self) -> DVector<f64> {
        let m = self.kept() as f64;
        let mean = self.beta_mean();
        DVector::from_fn(self.beta.ncols(), |j, _| {
            let ss = self
                .beta
                .column(j)
                .iter()
                .map(|b| (b - mean[j]).powi(2))
                .sum::<f64>();
            (ss / (m - 1.0)).sqrt()
        })
    }

    /// Equal-tailed posterior interval for coefficient `j`.
    pub fn beta_interval(&self, j: usize, level: f64) -> Result<(f64, f64)> {
        if j >= self.beta.ncols() {
            return Err(Error::invalid(format!(
                "coefficient index {j} out of range for {} columns",
                self.beta.ncols()
            )));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid(format!(
                "interval level must lie in (0, 1), got {level}"
            )));
        }
        let mut v: Vec<f64> = self.beta.column(j).iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - level);
        Ok((empirical_quantile(&v, tail), empirical_quantile(&v, 1.0 - tail)))
    }
}

/// Linear-interpolation quantile of an already sorted sample.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Draws an index from the categorical distribution with the given
/// unnormalized log weights.
pub(crate) fn sample_categorical_from_log_weights<R: Rng + ?Sized>(
    rng: &mut R,
    log_weights: &[f64],
) -> Result<usize> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric(
            "categorical draw: no weight has positive probability".into(),
        ));
    }
    let total: f64 = log_weights.iter().map(|lw| (lw - max).exp()).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (idx, lw) in log_weights.iter().enumerate() {
        acc += (lw - max).exp();
        if target < acc {
            return Ok(idx);
        }
    }
    Ok(log_weights.len() - 1)
}

/// Vector of iid standard normal draws.
pub(crate) fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Samples `N(P^{-1} rhs, P^{-1})` given the precision `P` and the linear
/// form `rhs`, via one Cholesky factorization.
pub(crate) fn sample_gaussian_from_precision<R: Rng + ?Sized>(
    rng: &mut R,
    precision: DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = precision.nrows();
    let chol = precision.cholesky().ok_or_else(|| {
        Error::Numeric("coefficient precision is not positive definite".into())
    })?;
    let mean = chol.solve(rhs);
    let z = standard_normal_vector(rng, p);
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numeric("triangular solve failed on a Cholesky factor".into()))?;
    Ok(mean + noise)
}

/// Table of scaled Irwin-Hall log densities: entry `(i, l-1)` holds
/// `log h(y_i, l)` for `l = 1..=truncation`.
///
/// Boundary observations give `-inf` for every `l >= 2`, which is what pins
/// their dispersion updates at one.
pub(crate) fn log_h_table(y: &DVector<f64>, truncation: u32) -> Result<DMatrix<f64>> {
    let n = y.len();
    let l_max = truncation as usize;
    let mut table = DMatrix::zeros(n, l_max);
    for i in 0..n {
        for l in 1..=l_max {
            table[(i, l - 1)] = log_irwin_hall_scaled(y[i], l as u32)?;
        }
    }
    Ok(table)
}

/// Shared validation for the Gibbs samplers.
///
/// Differs from the optimizer-side checks in one respect: an empty dataset is
/// allowed, so that a prior-only run is expressible.
pub(crate) fn validate_gibbs_inputs(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_prior: &BetaPrior,
) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but the response has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("design matrix needs at least one column"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix entries must be finite"));
    }
    for (i, &yi) in y.iter().enumerate() {
        if !(0.0..=1.0).contains(&yi) {
            return Err(Error::invalid(format!(
                "response {i} is {yi}, outside the unit interval"
            )));
        }
    }
    if beta_prior.mean.len() != x.ncols() || beta_prior.precision.nrows() != x.ncols() {
        return Err(Error::invalid(format!(
            "coefficient prior has dimension {} but the design has {} columns",
            beta_prior.mean.len(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Gaussian conditional for the coefficients given augmentation weights.
///
/// Returns the precision `X' K X + P` and the linear form `X' d + P m0`,
/// where `K = diag(kappa)`, `d_i = lambda_i (y_i - 1/2)`, and `(m0, P)` are
/// the prior mean and precision. The conditional is `N(V rhs, V)` with
/// `V = precision^{-1}`.
pub(crate) fn conditional_beta_moments(
    x: &DMatrix<f64>,
    kappa: &DVector<f64>,
    d: &DVector<f64>,
    prior: &BetaPrior,
) -> (DMatrix<f64>, DVector<f64>) {
    let p = x.ncols();
    let mut precision = prior.precision.clone();
    let mut rhs = &prior.precision * &prior.mean;
    for i in 0..x.nrows() {
        let xi = x.row(i);
        for a in 0..p {
            rhs[a] += d[i] * xi[a];
            for b in a..p {
                precision[(a, b)] += kappa[i] * xi[a] * xi[b];
            }
        }
    }
    for a in 0..p {
        for b in (a + 1)..p {
            precision[(b, a)] = precision[(a, b)];
        }
    }
    (precision, rhs)
}

/// Sum of the conditional log-likelihood kernel at unit dispersion:
/// `sum_i (eta_i y_i - B(eta_i))`. The shared-dispersion weights scale this
/// by `lambda`.
pub(crate) fn kernel_sum(eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| e * yi - cumulant_value(e))
        .sum()
}
