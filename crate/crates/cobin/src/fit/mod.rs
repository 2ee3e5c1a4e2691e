//! Point estimation for continuous-binomial regression.
//!
//! - [`fit_irls`]: Fisher-scoring / iteratively reweighted least squares for
//!   the regression coefficients under the canonical (cobit) or logit link.
//!   The maximizer does not depend on the dispersion parameter, so IRLS works
//!   on the unit-dispersion objective.
//! - [`fit_em`]: an EM algorithm for MAP estimation under the canonical link,
//!   whose E-step replaces the Kolmogorov-Gamma augmentation variables by
//!   their conditional means and whose M-step is one ridge-weighted least
//!   squares solve.
//! - [`profile_lambda`]: profile posterior over the integer dispersion grid,
//!   reusing the dispersion-free coefficient estimate.
//!
//! Shared building blocks: [`Link`], the Gaussian coefficient prior
//! [`BetaPrior`], and the discrete dispersion prior [`LambdaPrior`].

mod em;
mod irls;

pub use em::{fit_em, profile_lambda, EmFit, EmOptions, LambdaProfile};
pub use irls::{fit_irls, IrlsFit, IrlsOptions};

use nalgebra::{DMatrix, DVector};

use crate::dist::{cobit_link, mean_response, unit_variance};
use crate::{Error, Result};

/// Mean model connecting the linear predictor `eta` to the response mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Canonical link: the natural parameter is the linear predictor itself,
    /// `mu = B'(eta)`.
    Cobit,
    /// `mu = 1 / (1 + exp(-eta))`; the natural parameter is recovered by
    /// inverting the canonical mean map.
    Logit,
}

impl Link {
    /// Mean response at a linear predictor value.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Link::Cobit => mean_response(eta),
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
        }
    }

    /// Natural parameter at a linear predictor value.
    pub fn theta(self, eta: f64) -> Result<f64> {
        match self {
            Link::Cobit => Ok(eta),
            Link::Logit => cobit_link(self.mean(eta)),
        }
    }

    /// Per-observation score `s = dl/deta` and Fisher weight
    /// `w = (dmu/deta)^2 / V(mu)` for the unit-dispersion objective
    /// `l(eta) = theta(eta) y - B(theta(eta))`.
    fn score_weight(self, eta: f64, y: f64) -> Result<(f64, f64)> {
        match self {
            Link::Cobit => Ok((y - mean_response(eta), unit_variance(eta))),
            Link::Logit => {
                let mu = self.mean(eta);
                let theta = cobit_link(mu)?;
                let dmu = mu * (1.0 - mu);
                let v = unit_variance(theta);
                Ok(((y - mu) * dmu / v, dmu * dmu / v))
            }
        }
    }

    /// Unit-dispersion log-likelihood kernel `sum_i theta_i y_i - B(theta_i)`.
    fn kernel(self, x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Result<f64> {
        let eta = x * beta;
        let mut total = 0.0;
        for i in 0..y.len() {
            let theta = self.theta(eta[i])?;
            total += theta * y[i] - crate::dist::cumulant(theta).value;
        }
        Ok(total)
    }
}

/// Gaussian prior on the regression coefficients, stored as mean and
/// precision so an improper flat prior is just "no prior".
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPrior {
    /// Prior mean vector.
    pub mean: DVector<f64>,
    /// Prior precision matrix (inverse covariance).
    pub precision: DMatrix<f64>,
}

impl BetaPrior {
    /// Mean-zero isotropic prior `N(0, sd^2 I_p)`.
    pub fn isotropic(p: usize, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::invalid(format!(
                "prior standard deviation must be positive and finite, got {sd}"
            )));
        }
        Ok(Self {
            mean: DVector::zeros(p),
            precision: DMatrix::identity(p, p) / (sd * sd),
        })
    }

    /// Log-density kernel `-(beta - m)' P (beta - m) / 2`.
    pub fn log_density_kernel(&self, beta: &DVector<f64>) -> f64 {
        let d = beta - &self.mean;
        -0.5 * (&self.precision * &d).dot(&d)
    }
}

/// Discrete prior on the integer dispersion parameter: unnormalized weights
/// `36 l / ((l+1)(l+2)(l+3)(l+4))` truncated at `truncation` and
/// renormalized. The untruncated weights sum to 1 over all `l >= 1`; the
/// default truncation 70 keeps 99.67% of that mass before renormalizing.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPrior {
    log_probs: Vec<f64>,
}

impl LambdaPrior {
    /// Default truncation point of the dispersion grid.
    pub const DEFAULT_TRUNCATION: u32 = 70;

    /// Prior truncated to `1..=truncation` and renormalized.
    pub fn new(truncation: u32) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::invalid("dispersion prior needs truncation >= 1"));
        }
        let mut weights: Vec<f64> = (1..=truncation)
            .map(|l| {
                let l = f64::from(l);
                36.0 * l / ((l + 1.0) * (l + 2.0) * (l + 3.0) * (l + 4.0))
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w = (*w / total).ln();
        }
        Ok(Self { log_probs: weights })
    }

    /// Number of grid points (the truncation).
    pub fn truncation(&self) -> u32 {
        self.log_probs.len() as u32
    }

    /// Log prior probability of `lambda` (1-based; zero probability outside
    /// the grid is reported as negative infinity).
    pub fn log_prob(&self, lambda: u32) -> f64 {
        if lambda == 0 || lambda > self.truncation() {
            f64::NEG_INFINITY
        } else {
            self.log_probs[(lambda - 1) as usize]
        }
    }
}

impl Default for LambdaPrior {
    fn default() -> Self {
        Self::new(Self::DEFAULT_TRUNCATION).expect("default truncation is valid")
    }
}

/// Shape checks shared by the fitting entry points.
fn validate_design(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but the response has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid("design matrix must be nonempty"));
    }
    if x.ncols() > x.nrows() {
        return Err(Error::invalid(format!(
            "more columns ({}) than rows ({}) in the design",
            x.ncols(),
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix contains non-finite entries"));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(
            "responses must lie in the closed unit interval",
        ));
    }
    Ok(())
}
