//! Fixed-effects Gibbs samplers.
//!
//! Two exact blocked samplers over `(dispersion, augmentation, coefficients)`:
//!
//! * shared integer dispersion — one categorical draw per sweep over the
//!   truncated dispersion grid, using the fact that the log weight of grid
//!   point `l` decomposes into a response-only part (cached once) and
//!   `l` times the kernel sum of the current linear predictor;
//! * per-observation dispersion mixed over a shifted negative binomial — a
//!   categorical draw per observation, followed by a conjugate Beta update of
//!   the mixing probability.
//!
//! Both reduce the coefficient update to one Gaussian draw through the
//! Kolmogorov-Gamma augmentation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Distribution;

use crate::dist::cumulant_value;
use crate::{Error, Result};

use super::{
    conditional_beta_moments, kernel_sum, log_h_table, sample_categorical_from_log_weights,
    sample_gaussian_from_precision, validate_gibbs_inputs, DispersionDraws, GibbsOptions,
    PosteriorDraws, RegressionPriors,
};

/// Gibbs sampler for the shared-dispersion regression model.
///
/// Sweeps draw, in order: the integer dispersion `lambda` from its truncated
/// categorical conditional, one Kolmogorov-Gamma weight per observation, and
/// the coefficient vector from its Gaussian conditional. With an empty
/// dataset the chain samples the prior exactly.
pub fn sample_cobin_regression<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    priors: &RegressionPriors,
    options: &GibbsOptions,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    validate_gibbs_inputs(x, y, &priors.beta)?;
    let kept = options.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    let l_max = priors.lambda.truncation() as usize;

    // Response-only parts of the dispersion weights, cached once:
    // prior mass and the summed Irwin-Hall base densities.
    let table = log_h_table(y, l_max as u32)?;
    let base_weight: Vec<f64> = (1..=l_max)
        .map(|l| priors.lambda.log_prob(l as u32) + table.column(l - 1).sum())
        .collect();

    let mut beta = DVector::zeros(p);
    let mut kappa = DVector::zeros(n);
    let mut log_weights = vec![0.0f64; l_max];

    let mut beta_draws = DMatrix::zeros(kept, p);
    let mut lambda_draws = Vec::with_capacity(kept);

    for sweep in 0..options.iterations {
        let eta = x * &beta;

        // Dispersion: log w_l = log prior_l + sum_i log h(y_i, l) + l * S.
        let s = kernel_sum(&eta, y);
        for (l, w) in log_weights.iter_mut().enumerate() {
            *w = base_weight[l] + (l + 1) as f64 * s;
        }
        let lambda = (sample_categorical_from_log_weights(rng, &log_weights)? + 1) as u32;

        // Augmentation weights.
        for i in 0..n {
            kappa[i] = crate::kg::sample_kg(rng, lambda, eta[i], &options.envelope)?;
        }

        // Coefficients.
        let d = DVector::from_fn(n, |i, _| f64::from(lambda) * (y[i] - 0.5));
        let (precision, rhs) = conditional_beta_moments(x, &kappa, &d, &priors.beta);
        beta = sample_gaussian_from_precision(rng, precision, &rhs)?;

        if sweep >= options.burnin {
            let k = sweep - options.burnin;
            beta_draws.row_mut(k).copy_from(&beta.transpose());
            lambda_draws.push(lambda);
        }
    }

    Ok(PosteriorDraws {
        beta: beta_draws,
        dispersion: DispersionDraws::Lambda(lambda_draws),
        random_effects: None,
        random_effect_variance: None,
        provenance: None,
    })
}

/// Gibbs sampler for the per-observation-dispersion regression model.
///
/// Each observation carries its own integer dispersion, mixed over a shifted
/// negative binomial with success probability `psi`; boundary observations
/// are handled exactly because their dispersion conditional collapses onto
/// one. `psi` gets a conjugate Beta update each sweep.
pub fn sample_micobin_regression<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    priors: &RegressionPriors,
    options: &GibbsOptions,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    validate_gibbs_inputs(x, y, &priors.beta)?;
    priors.psi.validate()?;
    let kept = options.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    let l_max = priors.psi.truncation as usize;

    let table = log_h_table(y, l_max as u32)?;
    let log_l: Vec<f64> = (1..=l_max).map(|l| (l as f64).ln()).collect();

    let mut beta = DVector::zeros(p);
    let mut psi = 0.5f64;
    let mut lambda = vec![1u32; n];
    let mut kappa = DVector::zeros(n);
    let mut d = DVector::zeros(n);
    let mut log_weights = vec![0.0f64; l_max];

    let mut beta_draws = DMatrix::zeros(kept, p);
    let mut psi_draws = Vec::with_capacity(kept);

    for sweep in 0..options.iterations {
        let eta = x * &beta;

        // Per-observation dispersion. The mixing weight of grid point l is
        // l psi^2 (1-psi)^(l-1); psi^2 is constant across l and drops out.
        let log_one_minus_psi = (-psi).ln_1p();
        for i in 0..n {
            let s_i = eta[i] * y[i] - cumulant_value(eta[i]);
            for (l, w) in log_weights.iter_mut().enumerate() {
                *w = log_l[l]
                    + l as f64 * log_one_minus_psi
                    + table[(i, l)]
                    + (l + 1) as f64 * s_i;
            }
            lambda[i] = (sample_categorical_from_log_weights(rng, &log_weights)? + 1) as u32;
        }

        // Augmentation weights and working response scale.
        for i in 0..n {
            kappa[i] = crate::kg::sample_kg(rng, lambda[i], eta[i], &options.envelope)?;
            d[i] = f64::from(lambda[i]) * (y[i] - 0.5);
        }

        // Coefficients.
        let (precision, rhs) = conditional_beta_moments(x, &kappa, &d, &priors.beta);
        beta = sample_gaussian_from_precision(rng, precision, &rhs)?;

        // Mixing probability: Beta(a + 2n, b - n + sum lambda_i).
        let lambda_sum: f64 = lambda.iter().map(|&l| f64::from(l)).sum();
        let a_post = priors.psi.a + 2.0 * n as f64;
        let b_post = priors.psi.b - n as f64 + lambda_sum;
        let beta_dist = rand_distr::Beta::new(a_post, b_post).map_err(|_| {
            Error::Numeric(format!(
                "mixing-probability update has invalid shapes ({a_post}, {b_post})"
            ))
        })?;
        psi = beta_dist.sample(rng);

        if sweep >= options.burnin {
            let k = sweep - options.burnin;
            beta_draws.row_mut(k).copy_from(&beta.transpose());
            psi_draws.push(psi);
        }
    }

    Ok(PosteriorDraws {
        beta: beta_draws,
        dispersion: DispersionDraws::Psi(psi_draws),
        random_effects: None,
        random_effect_variance: None,
        provenance: None,
    })
}
