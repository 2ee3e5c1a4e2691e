//! Predictive scores and chain-quality summaries.
//!
//! Everything here is a pure function of posterior draws and data: the
//! negative test log-likelihood (log posterior-predictive mixture density,
//! negated), mean squared prediction error of the conditional mean, WAIC,
//! a multivariate effective sample size, and split-R-hat. All metrics are
//! deterministic given the draws and invariant to reordering them (up to
//! floating-point accumulation noise), except split-R-hat, which by design
//! measures ordering.

use nalgebra::{DMatrix, DVector};

use crate::dist::{cumulant_value, mean_response};
use crate::gibbs::{log_h_table, DispersionDraws};
use crate::{Error, Result};

/// Per-cell summary of an evaluation: estimation error plus whatever
/// predictive and sampler-quality metrics the experiment produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Signed mean error of the slope estimate.
    pub bias: f64,
    /// Root mean squared error of the slope estimate.
    pub rmse: f64,
    /// Negative test log-likelihood, when a test set was scored.
    pub negtestll: Option<f64>,
    /// Mean squared prediction error of the conditional mean.
    pub mspe: Option<f64>,
    /// Multivariate effective sample size of the coefficient chain.
    pub mess: Option<f64>,
    /// Widely applicable information criterion, when computed.
    pub waic: Option<f64>,
}

/// Negative test log-likelihood of held-out observations under the
/// posterior-predictive mixture:
///
/// ```text
/// negtestLL = -(1/n) sum_i log[ (1/M) sum_m p(y_i | eta_mi, dispersion_m) ]
/// ```
///
/// `eta_draws` is `M x n` (draw rows, observation columns) of natural
/// parameters — predictions conditional on random effects use
/// `eta = x'beta + u`. The dispersion draws select the family: integer
/// draws score the continuous-binomial density, mixing-probability draws
/// the micobin mixture truncated at `truncation` (ignored for integer
/// draws, which bound their own table).
pub fn negtestll(
    eta_draws: &DMatrix<f64>,
    dispersion: &DispersionDraws,
    y: &DVector<f64>,
    truncation: u32,
) -> Result<f64> {
    let draws = eta_draws.nrows();
    let n = eta_draws.ncols();

    // Streaming log-sum-exp per observation across draws.
    let mut running_max = vec![f64::NEG_INFINITY; n];
    let mut scaled_sum = vec![0.0f64; n];
    for_each_log_density(eta_draws, dispersion, y, truncation, |_, i, lp| {
        if lp <= running_max[i] {
            scaled_sum[i] += (lp - running_max[i]).exp();
        } else {
            scaled_sum[i] = scaled_sum[i] * (running_max[i] - lp).exp() + 1.0;
            running_max[i] = lp;
        }
    })?;

    let log_m = (draws as f64).ln();
    let mut total = 0.0;
    for i in 0..n {
        total += running_max[i] + scaled_sum[i].ln() - log_m;
    }
    Ok(-total / n as f64)
}

/// Per-draw, per-observation log densities as an `M x n` matrix, computed
/// with the same shared-table fast path as [`negtestll`]; feeds [`waic`].
pub fn log_density_draws(
    eta_draws: &DMatrix<f64>,
    dispersion: &DispersionDraws,
    y: &DVector<f64>,
    truncation: u32,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(eta_draws.nrows(), eta_draws.ncols());
    for_each_log_density(eta_draws, dispersion, y, truncation, |m, i, lp| {
        out[(m, i)] = lp;
    })?;
    Ok(out)
}

/// Shared core of [`negtestll`] and [`log_density_draws`]: validates the
/// inputs, builds the base-measure table once, and visits the log density
/// of observation `i` under draw `m` as `visit(m, i, lp)`.
fn for_each_log_density(
    eta_draws: &DMatrix<f64>,
    dispersion: &DispersionDraws,
    y: &DVector<f64>,
    truncation: u32,
    mut visit: impl FnMut(usize, usize, f64),
) -> Result<()> {
    let draws = eta_draws.nrows();
    let n = eta_draws.ncols();
    if draws == 0 || n == 0 {
        return Err(Error::invalid("log density needs at least one draw and one observation"));
    }
    if dispersion.len() != draws {
        return Err(Error::invalid(format!(
            "log density: {draws} eta draws but {} dispersion draws",
            dispersion.len()
        )));
    }
    if y.len() != n {
        return Err(Error::invalid(format!(
            "log density: eta draws cover {n} observations, y has {}",
            y.len()
        )));
    }
    if eta_draws.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("log density: non-finite linear predictor draw"));
    }

    let table_width = match dispersion {
        DispersionDraws::Lambda(lambdas) => {
            *lambdas.iter().max().expect("nonempty checked above")
        }
        DispersionDraws::Psi(_) => {
            if truncation == 0 {
                return Err(Error::invalid("log density: truncation must be >= 1"));
            }
            truncation
        }
    };
    let table = log_h_table(y, table_width)?;

    match dispersion {
        DispersionDraws::Lambda(lambdas) => {
            for (m, &lambda) in lambdas.iter().enumerate() {
                let lf = lambda as f64;
                for i in 0..n {
                    let theta = eta_draws[(m, i)];
                    let lp = table[(i, lambda as usize - 1)]
                        + lf * (theta * y[i] - cumulant_value(theta));
                    visit(m, i, lp);
                }
            }
        }
        DispersionDraws::Psi(psis) => {
            for (m, &psi) in psis.iter().enumerate() {
                if !(psi > 0.0 && psi < 1.0) {
                    return Err(Error::invalid(format!(
                        "log density: psi draw {psi} outside (0, 1)"
                    )));
                }
                let log_psi2 = 2.0 * psi.ln();
                let log_q = (-psi).ln_1p();
                for i in 0..n {
                    let theta = eta_draws[(m, i)];
                    let tilt = theta * y[i] - cumulant_value(theta);
                    // log-sum-exp over the dispersion mixture for one draw.
                    let mut max = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    for lambda in 1..=table_width {
                        let lf = lambda as f64;
                        let term = lf.ln()
                            + log_psi2
                            + (lf - 1.0) * log_q
                            + table[(i, lambda as usize - 1)]
                            + lf * tilt;
                        if term <= max {
                            sum += (term - max).exp();
                        } else {
                            sum = sum * (max - term).exp() + 1.0;
                            max = term;
                        }
                    }
                    visit(m, i, max + sum.ln());
                }
            }
        }
    }
    Ok(())
}

/// Mean squared prediction error of the posterior-mean conditional mean:
/// `MSPE = (1/n) sum_i (mu_true_i - mean_m B'(eta_mi))^2`.
pub fn mspe(eta_draws: &DMatrix<f64>, mu_true: &DVector<f64>) -> Result<f64> {
    let draws = eta_draws.nrows();
    let n = eta_draws.ncols();
    if draws == 0 || n == 0 {
        return Err(Error::invalid("mspe needs at least one draw and one observation"));
    }
    if mu_true.len() != n {
        return Err(Error::invalid(format!(
            "mspe: eta draws cover {n} observations, mu_true has {}",
            mu_true.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut mu_hat = 0.0;
        for m in 0..draws {
            mu_hat += mean_response(eta_draws[(m, i)]);
        }
        mu_hat /= draws as f64;
        total += (mu_true[i] - mu_hat).powi(2);
    }
    if !total.is_finite() {
        return Err(Error::Numeric("mspe is not finite".into()));
    }
    Ok(total / n as f64)
}

/// Multivariate effective sample size of an `M x p` chain:
/// `mESS = M * (det(sample covariance) / det(batch-means covariance))^(1/p)`
/// with non-overlapping batches of size `floor(sqrt(M))`.
pub fn multivariate_ess(draws: &DMatrix<f64>) -> Result<f64> {
    let m = draws.nrows();
    let p = draws.ncols();
    if m < 10 {
        return Err(Error::invalid(format!(
            "multivariate ESS needs at least 10 draws for the batch-means covariance, got {m}"
        )));
    }
    if p == 0 {
        return Err(Error::invalid("multivariate ESS needs at least one component"));
    }
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("multivariate ESS: non-finite draw"));
    }

    let mean = draws.row_mean().transpose();
    let mut sample_cov = DMatrix::zeros(p, p);
    for k in 0..m {
        let centered = draws.row(k).transpose() - &mean;
        sample_cov += &centered * centered.transpose();
    }
    sample_cov /= (m - 1) as f64;

    let batch = (m as f64).sqrt().floor() as usize;
    let batches = m / batch;
    let used = batch * batches;
    let mut batch_means = DMatrix::zeros(batches, p);
    for k in 0..batches {
        for j in 0..p {
            let mut s = 0.0;
            for t in 0..batch {
                s += draws[(k * batch + t, j)];
            }
            batch_means[(k, j)] = s / batch as f64;
        }
    }
    let grand = batch_means.row_mean().transpose();
    let mut bm_cov = DMatrix::zeros(p, p);
    for k in 0..batches {
        let centered = batch_means.row(k).transpose() - &grand;
        bm_cov += &centered * centered.transpose();
    }
    bm_cov *= batch as f64 / (batches - 1) as f64;

    let det_cov = sample_cov.determinant();
    let det_bm = bm_cov.determinant();
    if !(det_cov > 0.0 && det_bm > 0.0) {
        return Err(Error::Numeric(format!(
            "multivariate ESS: degenerate covariance (det {det_cov}, batch det {det_bm}, \
             {used} of {m} draws in {batches} batches)"
        )));
    }
    Ok(m as f64 * (det_cov / det_bm).powf(1.0 / p as f64))
}

/// Widely applicable information criterion from an `M x n` matrix of
/// per-draw, per-observation log densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waic {
    /// `-2 (lppd - penalty)`; smaller is better.
    pub waic: f64,
    /// Log pointwise predictive density `sum_i log mean_m p(y_i | draw m)`.
    pub lppd: f64,
    /// Effective parameter count `sum_i var_m log p(y_i | draw m)`.
    pub penalty: f64,
}

/// WAIC with the variance-based penalty, conditional on whatever latent
/// variables the log densities were evaluated at.
pub fn waic(log_densities: &DMatrix<f64>) -> Result<Waic> {
    let m = log_densities.nrows();
    let n = log_densities.ncols();
    if m < 2 || n == 0 {
        return Err(Error::invalid(
            "WAIC needs at least two draws and one observation",
        ));
    }
    if log_densities.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "WAIC: non-finite log density (the model assigns zero density to an observation)"
                .into(),
        ));
    }
    let mut lppd = 0.0;
    let mut penalty = 0.0;
    for i in 0..n {
        let column = log_densities.column(i);
        let max = column.max();
        let mut sum = 0.0;
        let mut mean = 0.0;
        for v in column.iter() {
            sum += (v - max).exp();
            mean += v;
        }
        mean /= m as f64;
        let mut var = 0.0;
        for v in column.iter() {
            var += (v - mean).powi(2);
        }
        lppd += max + (sum / m as f64).ln();
        penalty += var / (m - 1) as f64;
    }
    Ok(Waic { waic: -2.0 * (lppd - penalty), lppd, penalty })
}

/// Split-R-hat of one scalar chain family: each chain is halved, and the
/// usual between/within variance ratio is computed over the resulting
/// sequences. Values near 1 indicate the chains mixed; the conventional
/// bar is 1.01.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::invalid("split R-hat needs at least one chain"));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("split R-hat: chains must share one length"));
    }
    if len < 4 {
        return Err(Error::invalid("split R-hat needs chains of length >= 4"));
    }
    let half = len / 2;
    let mut sequences: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        sequences.push(&chain[..half]);
        sequences.push(&chain[half..2 * half]);
    }
    if sequences.iter().flat_map(|s| s.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("split R-hat: non-finite draw"));
    }

    let s = sequences.len() as f64;
    let n = half as f64;
    let means: Vec<f64> =
        sequences.iter().map(|q| q.iter().sum::<f64>() / n).collect();
    let within: f64 = sequences
        .iter()
        .zip(&means)
        .map(|(q, mean)| q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / s;
    let grand = means.iter().sum::<f64>() / s;
    let between =
        n * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (s - 1.0);

    if within <= 0.0 {
        return if between <= 0.0 {
            Ok(1.0) // all sequences constant and equal
        } else {
            Err(Error::Numeric(
                "split R-hat: zero within-sequence variance but unequal sequences".into(),
            ))
        };
    }
    let pooled = (n - 1.0) / n * within + between / n;
    Ok((pooled / within).sqrt())
}

/// Largest split-R-hat across the columns of per-chain draw matrices
/// (one `kept x p` matrix per chain).
pub fn max_split_rhat(chains: &[&DMatrix<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::invalid("split R-hat needs at least one chain"));
    }
    let p = chains[0].ncols();
    if chains.iter().any(|c| c.ncols() != p) {
        return Err(Error::invalid("split R-hat: chains must share a column count"));
    }
    let mut worst = f64::NEG_INFINITY;
    for j in 0..p {
        let columns: Vec<DVector<f64>> =
            chains.iter().map(|c| c.column(j).clone_owned()).collect();
        let views: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
        worst = worst.max(split_rhat(&views)?);
    }
    Ok(worst)
}
