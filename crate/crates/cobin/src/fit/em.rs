//! EM algorithm for MAP coefficients under the canonical link, and the
//! profile posterior over the integer dispersion grid.
//!
//! The complete-data model augments each observation with a
//! Kolmogorov-Gamma variable whose conditional mean is available in closed
//! form, so the E-step is a vector of [`kg_mean`] evaluations and the
//! M-step a single ridge-weighted least-squares solve. Each sweep increases
//! the observed-data log posterior (standard EM monotonicity), which the
//! returned trace makes checkable.

use nalgebra::{DMatrix, DVector};

use crate::dist::{cumulant_value, Cobin};
use crate::fit::{fit_irls, validate_design, BetaPrior, IrlsOptions, LambdaPrior, Link};
use crate::kg::kg_mean;
use crate::{Error, Result};

/// Tuning knobs for [`fit_em`].
#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    /// Maximum EM sweeps.
    pub max_iter: u32,
    /// Relative log-posterior improvement below which...
    /// (both this and `param_tol` must hold to declare convergence).
    pub rel_tol: f64,
    /// Max-norm of the coefficient update below which (together with
    /// `rel_tol`) the algorithm stops.
    pub param_tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 2_000,
            rel_tol: 1e-10,
            param_tol: 1e-8,
        }
    }
}

/// Result of a converged EM run.
#[derive(Debug, Clone)]
pub struct EmFit {
    /// MAP (or, under a flat prior, maximum-likelihood) coefficients.
    pub beta: DVector<f64>,
    /// Log posterior kernel at the estimate:
    /// `lambda * sum_i [eta_i y_i - B(eta_i)]` plus the prior kernel.
    pub log_posterior: f64,
    /// Log posterior kernel after every sweep (monotone non-decreasing).
    pub trace: Vec<f64>,
    /// Sweeps used.
    pub iterations: u32,
}

/// Observed-data log posterior kernel monitored by EM.
fn log_posterior(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: u32,
    prior: Option<&BetaPrior>,
    beta: &DVector<f64>,
) -> f64 {
    let eta = x * beta;
    let mut kernel = 0.0;
    for i in 0..y.len() {
        kernel += eta[i] * y[i] - cumulant_value(eta[i]);
    }
    f64::from(lambda) * kernel + prior.map_or(0.0, |p| p.log_density_kernel(beta))
}

/// MAP coefficients under the canonical link by expectation-maximization.
///
/// `lambda` is the (fixed) integer dispersion; `prior` of `None` means the
/// improper flat prior, making this a maximum-likelihood fit that matches
/// [`fit_irls`] with the canonical link. The link is canonical by
/// construction — the augmentation that powers the E-step exists for the
/// natural-parameter linear predictor.
pub fn fit_em(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: u32,
    prior: Option<&BetaPrior>,
    options: &EmOptions,
) -> Result<EmFit> {
    validate_design(x, y)?;
    if lambda == 0 {
        return Err(Error::invalid("dispersion must be >= 1"));
    }
    let n = x.nrows();
    let p = x.ncols();
    if let Some(prior) = prior {
        if prior.mean.len() != p || prior.precision.nrows() != p || prior.precision.ncols() != p {
            return Err(Error::invalid(format!(
                "prior dimension {} does not match the design's {p} columns",
                prior.mean.len()
            )));
        }
    }
    let lf = f64::from(lambda);
    // X' (lambda (y - 1/2)) stays fixed across sweeps.
    let shifted = DVector::from_fn(n, |i, _| lf * (y[i] - 0.5));
    let mut rhs_base = x.transpose() * &shifted;
    if let Some(prior) = prior {
        rhs_base += &prior.precision * &prior.mean;
    }

    let mut beta = DVector::zeros(p);
    let mut objective = log_posterior(x, y, lambda, prior, &beta);
    let mut trace = Vec::new();

    for iter in 1..=options.max_iter {
        // E-step: conditional means of the augmentation variables.
        let eta = x * &beta;
        let kappa = DVector::from_fn(n, |i, _| kg_mean(lambda, eta[i]));

        // M-step: ridge-weighted least squares.
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let row = x.row(i);
            for a in 0..p {
                for b in a..p {
                    info[(a, b)] += kappa[i] * row[a] * row[b];
                }
            }
        }
        info.fill_lower_triangle_with_upper_triangle();
        if let Some(prior) = prior {
            info += &prior.precision;
        }
        let chol = info.cholesky().ok_or_else(|| {
            Error::Numeric(
                "singular EM normal equations; is the design rank-deficient?".into(),
            )
        })?;
        let next = chol.solve(&rhs_base);

        let step = (&next - &beta).amax();
        let value = log_posterior(x, y, lambda, prior, &next);
        let improvement = value - objective;
        beta = next;
        objective = value;
        trace.push(value);

        if improvement.abs() <= options.rel_tol * (1.0 + objective.abs())
            && step <= options.param_tol
        {
            return Ok(EmFit {
                beta,
                log_posterior: objective,
                trace,
                iterations: iter,
            });
        }
    }

    Err(Error::NoConvergence {
        context: "EM sweeps".into(),
        iterations: u64::from(options.max_iter),
    })
}

/// Profile posterior over the dispersion grid.
#[derive(Debug, Clone)]
pub struct LambdaProfile {
    /// Maximizer of the profile.
    pub best_lambda: u32,
    /// `log p(lambda) + sum_i log p(y_i; eta_i, lambda)` for each grid
    /// point `lambda = 1, ..., truncation`, up to a constant.
    pub log_profile: Vec<f64>,
    /// The dispersion-free coefficient estimate the profile is built on.
    pub beta: DVector<f64>,
}

/// Maximum-profile-posterior dispersion under the canonical link.
///
/// The coefficient estimate does not depend on the dispersion, so it is
/// computed once by IRLS and plugged into the full likelihood (including
/// the dispersion-dependent base measure) on the prior's grid. Boundary
/// responses have zero density for `lambda >= 2` and drive those grid
/// points to log-probability `-inf`, correctly forcing `lambda = 1`.
pub fn profile_lambda(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prior: &LambdaPrior,
) -> Result<LambdaProfile> {
    let fit = fit_irls(x, y, Link::Cobit, &IrlsOptions::default())?;
    let eta = x * &fit.beta;
    let mut log_profile = Vec::with_capacity(prior.truncation() as usize);
    for lambda in 1..=prior.truncation() {
        let mut total = prior.log_prob(lambda);
        for i in 0..y.len() {
            if !total.is_finite() {
                break;
            }
            total += Cobin::new(eta[i], lambda)?.log_density(y[i])?;
        }
        log_profile.push(total);
    }
    let best = log_profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i as u32 + 1)
        .expect("grid is nonempty");
    Ok(LambdaProfile {
        best_lambda: best,
        log_profile,
        beta: fit.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Cobin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(n: usize, beta: &[f64], lambda: u32, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let p = beta.len();
        let mut x = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..p {
                x[(i, j)] = normal.sample(&mut rng);
            }
            let eta: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
            y[i] = Cobin::new(eta, lambda).unwrap().sample(&mut rng);
        }
        (x, y)
    }

    #[test]
    fn em_and_irls_find_the_same_flat_prior_maximizer() {
        // Both maximize the same (dispersion-scaled) kernel; the EM fixed
        // point must coincide with the IRLS stationary point, at any
        // dispersion the EM is run with.
        let (x, y) = synthetic(250, &[0.4, -0.8], 3, 31);
        let irls = fit_irls(&x, &y, Link::Cobit, &IrlsOptions::default()).unwrap();
        for lambda in [1u32, 3, 10] {
            let em = fit_em(&x, &y, lambda, None, &EmOptions::default()).unwrap();
            for j in 0..2 {
                assert!(
                    (em.beta[j] - irls.beta[j]).abs() < 1e-6,
                    "lambda={lambda}: EM {} vs IRLS {}",
                    em.beta[j],
                    irls.beta[j]
                );
            }
        }
    }

    #[test]
    fn em_trace_is_monotone() {
        let (x, y) = synthetic(150, &[0.2, 0.9], 2, 37);
        let prior = BetaPrior::isotropic(2, 100.0).unwrap();
        let em = fit_em(&x, &y, 2, Some(&prior), &EmOptions::default()).unwrap();
        for w in em.trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()),
                "EM objective decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert_eq!(*em.trace.last().unwrap(), em.log_posterior);
    }

    #[test]
    fn a_tight_prior_shrinks_the_estimate() {
        let (x, y) = synthetic(150, &[0.5, 1.0], 2, 41);
        let flat = fit_em(&x, &y, 2, None, &EmOptions::default()).unwrap();
        let tight = BetaPrior::isotropic(2, 0.05).unwrap();
        let ridge = fit_em(&x, &y, 2, Some(&tight), &EmOptions::default()).unwrap();
        assert!(ridge.beta.norm() < flat.beta.norm());
        // A vague prior barely moves it.
        let vague = BetaPrior::isotropic(2, 100.0).unwrap();
        let nearly = fit_em(&x, &y, 2, Some(&vague), &EmOptions::default()).unwrap();
        assert!((nearly.beta - &flat.beta).amax() < 1e-3);
    }

    #[test]
    fn em_stationarity_is_a_score_zero() {
        // At the flat-prior fixed point, kappa-weighted normal equations
        // reduce to the canonical score equation X'(y - B'(eta)) = 0.
        let (x, y) = synthetic(120, &[0.3], 4, 43);
        let em = fit_em(&x, &y, 4, None, &EmOptions::default()).unwrap();
        let eta = &x * &em.beta;
        let resid = DVector::from_fn(y.len(), |i, _| y[i] - crate::dist::mean_response(eta[i]));
        assert!((x.transpose() * resid).amax() < 1e-7);
    }

    #[test]
    fn profile_recovers_the_generating_dispersion() {
        let (x, y) = synthetic(800, &[0.0, 1.0], 3, 47);
        let profile = profile_lambda(&x, &y, &LambdaPrior::default()).unwrap();
        assert_eq!(profile.log_profile.len(), 70);
        assert!(
            (2..=5).contains(&profile.best_lambda),
            "profile picked lambda = {}",
            profile.best_lambda
        );
        // The profile is finite everywhere for interior data.
        assert!(profile.log_profile.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn boundary_data_forces_unit_dispersion() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let x = DMatrix::from_element(60, 1, 1.0);
        let mut y = DVector::from_fn(60, |_, _| {
            Cobin::new(0.3, 1).unwrap().sample(&mut rng)
        });
        y[7] = 1.0; // an exact boundary observation
        let profile = profile_lambda(&x, &y, &LambdaPrior::default()).unwrap();
        assert_eq!(profile.best_lambda, 1);
        assert!(profile.log_profile[0].is_finite());
        assert!(profile.log_profile[1..].iter().all(|v| *v == f64::NEG_INFINITY));
    }

    #[test]
    fn em_rejects_mismatched_prior_dimensions() {
        let (x, y) = synthetic(50, &[0.1, 0.2], 1, 53);
        let prior = BetaPrior::isotropic(3, 10.0).unwrap();
        assert!(fit_em(&x, &y, 1, Some(&prior), &EmOptions::default()).is_err());
        assert!(fit_em(&x, &y, 0, None, &EmOptions::default()).is_err());
    }
}
