//! Desk-scale drivers for the two simulation studies.
//!
//! Both runners follow the same protocol: a master seed plus a replicate
//! index derive an independent RNG stream for every random decision, so the
//! summary tables are bit-reproducible regardless of thread count, and
//! individual replicate failures are excluded and counted instead of
//! aborting the study.
//!
//! The first study measures bias and RMSE of the slope estimated by
//! maximum likelihood (IRLS) across four response families, two links and
//! three sample sizes — the response distribution is usually misspecified,
//! the mean structure never is. The second study fits the two spatial
//! mixed models on beta-rectangular data over random locations and scores
//! held-out predictions.

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generate::{generate, DataGeneratorSpec, GeneratorFamily, SpatialSpec};
use super::metrics::{mspe, multivariate_ess, negtestll, MetricReport};
use crate::fit::{fit_irls, IrlsOptions, Link};
use crate::gibbs::{
    predict_spatial, sample_cobin_mixed, sample_micobin_mixed, ExponentialKernel, GibbsOptions,
    MixedOptions, MixedPriors, RandomEffectDesign, RandomEffectStructure,
};
use crate::{Error, Result};

/// Configuration of the estimator robustness study.
#[derive(Debug, Clone)]
pub struct Table1Config {
    /// Response families to generate from.
    pub families: Vec<GeneratorFamily>,
    /// Links, each used for both generation and fitting. The covariate
    /// scale follows the link: sd 3 for the canonical link, 1 for logit,
    /// matching the links' slopes at the centre.
    pub links: Vec<Link>,
    /// Sample sizes.
    pub sample_sizes: Vec<usize>,
    /// Replicates per cell.
    pub replicates: usize,
    /// Master seed; every (cell, replicate) pair derives its own stream.
    pub master_seed: u64,
}

impl Table1Config {
    /// The full study grid: four families, both links, n in
    /// {100, 400, 1600}.
    pub fn study_defaults(master_seed: u64, replicates: usize) -> Self {
        Self {
            families: vec![
                GeneratorFamily::Beta { phi: 8.0 },
                GeneratorFamily::Cobin { lambda: 3 },
                GeneratorFamily::BetaRectangular { alpha: 0.2, phi: 10.0 },
                GeneratorFamily::BetaMixture { phi: 40.0 },
            ],
            links: vec![Link::Cobit, Link::Logit],
            sample_sizes: vec![100, 400, 1600],
            replicates,
            master_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.links.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::invalid("study grid must be non-empty"));
        }
        if self.replicates < 2 {
            return Err(Error::invalid("need at least 2 replicates for Monte Carlo errors"));
        }
        if self.sample_sizes.iter().any(|n| *n < 3) {
            return Err(Error::invalid("sample sizes below 3 cannot identify two coefficients"));
        }
        Ok(())
    }
}

/// One cell of the robustness study: a (family, link, n) combination.
#[derive(Debug, Clone)]
pub struct Table1Cell {
    pub family: GeneratorFamily,
    pub link: Link,
    pub n: usize,
    /// Bias and RMSE of the slope estimate (the predictive fields stay
    /// empty in this study).
    pub report: MetricReport,
    /// Monte Carlo standard error of the bias.
    pub bias_mcse: f64,
    /// Monte Carlo standard error of the RMSE (delta method).
    pub rmse_mcse: f64,
    /// Replicates that produced an estimate.
    pub used: usize,
    /// Replicates excluded because generation or fitting failed.
    pub failures: usize,
    /// Successful replicates as (replicate index, slope error) pairs, in
    /// replicate order.
    pub per_replicate: Vec<(usize, f64)>,
}

/// Run the robustness study; one output cell per grid point, in
/// family-major, then link, then sample-size order.
pub fn run_table1(config: &Table1Config) -> Result<Vec<Table1Cell>> {
    config.validate()?;
    let true_slope = 1.0;
    let mut cells = Vec::new();
    let mut cell_index: u64 = 0;
    for family in &config.families {
        for link in &config.links {
            for &n in &config.sample_sizes {
                let spec = DataGeneratorSpec {
                    family: *family,
                    link: *link,
                    beta_true: DVector::from_column_slice(&[0.0, true_slope]),
                    x_sd: covariate_sd(*link),
                    n,
                    spatial: None,
                };
                let outcomes: Vec<Result<f64>> = (0..config.replicates)
                    .into_par_iter()
                    .map(|replicate| {
                        let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
                        rng.set_stream(((cell_index + 1) << 32) | replicate as u64);
                        let data = generate(&spec, &mut rng)?;
                        let fit = fit_irls(&data.x, &data.y, *link, &IrlsOptions::default())?;
                        Ok(fit.beta[1] - true_slope)
                    })
                    .collect();
                let per_replicate: Vec<(usize, f64)> = outcomes
                    .iter()
                    .enumerate()
                    .filter_map(|(r, o)| o.as_ref().ok().map(|e| (r, *e)))
                    .collect();
                let stats = summarize_errors(outcomes)?;
                cells.push(Table1Cell {
                    family: *family,
                    link: *link,
                    n,
                    report: MetricReport {
                        bias: stats.bias,
                        rmse: stats.rmse,
                        negtestll: None,
                        mspe: None,
                        mess: None,
                        waic: None,
                    },
                    bias_mcse: stats.bias_mcse,
                    rmse_mcse: stats.rmse_mcse,
                    used: stats.used,
                    failures: stats.failures,
                    per_replicate,
                });
                cell_index += 1;
            }
        }
    }
    Ok(cells)
}

/// Covariate scale matched to the link, so both links produce comparable
/// mean ranges (their derivatives at 1/2 differ by a factor of 3).
fn covariate_sd(link: Link) -> f64 {
    match link {
        Link::Cobit => 3.0,
        Link::Logit => 1.0,
    }
}

struct ErrorSummary {
    bias: f64,
    rmse: f64,
    bias_mcse: f64,
    rmse_mcse: f64,
    used: usize,
    failures: usize,
}

/// Aggregate per-replicate estimation errors, excluding and counting
/// failures.
fn summarize_errors(outcomes: Vec<Result<f64>>) -> Result<ErrorSummary> {
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    let errors: Vec<f64> = outcomes.into_iter().flatten().collect();
    let used = errors.len();
    if used < 2 {
        return Err(Error::Numeric(format!(
            "too few successful replicates ({used}) to summarize; {failures} failed"
        )));
    }
    let nf = used as f64;
    let bias = errors.iter().sum::<f64>() / nf;
    let m2 = errors.iter().map(|e| e * e).sum::<f64>() / nf;
    let rmse = m2.sqrt();
    let bias_var = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / (nf - 1.0);
    let bias_mcse = (bias_var / nf).sqrt();
    // Delta method: rmse = sqrt(m2), so se(rmse) = se(m2) / (2 rmse).
    let m2_var = errors.iter().map(|e| (e * e - m2).powi(2)).sum::<f64>() / (nf - 1.0);
    let rmse_mcse = if rmse > 0.0 { (m2_var / nf).sqrt() / (2.0 * rmse) } else { 0.0 };
    Ok(ErrorSummary { bias, rmse, bias_mcse, rmse_mcse, used, failures })
}

/// The two spatial mixed models the prediction study compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialModel {
    /// Shared integer dispersion.
    Cobin,
    /// Per-observation dispersion mixed over a shifted negative binomial.
    Micobin,
}

impl SpatialModel {
    /// Short name used in summary tables and CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            SpatialModel::Cobin => "cobin",
            SpatialModel::Micobin => "micobin",
        }
    }
}

/// Configuration of the spatial prediction study.
#[derive(Debug, Clone)]
pub struct Table2Config {
    /// Replicates (each replicate fits both models on the same data).
    pub replicates: usize,
    /// Training locations.
    pub n_train: usize,
    /// Held-out locations.
    pub n_test: usize,
    /// Exponential-correlation range, fixed at its generating value for
    /// fitting (the paper-style protocol).
    pub range: f64,
    /// Generating variance of the spatial surface.
    pub sigma2: f64,
    /// Covariate standard deviation.
    pub x_sd: f64,
    /// Response family of the generator.
    pub family: GeneratorFamily,
    /// Total Gibbs sweeps per fit.
    pub iterations: usize,
    /// Discarded warm-up sweeps.
    pub burnin: usize,
    /// Master seed; every (replicate, purpose) pair derives its own stream.
    pub master_seed: u64,
}

impl Table2Config {
    /// The study protocol at its published design point: 200 training and
    /// 50 test locations, beta-rectangular responses through the canonical
    /// link, range 0.1, unit variance — with desk-scale chains.
    pub fn study_defaults(master_seed: u64, replicates: usize) -> Self {
        Self {
            replicates,
            n_train: 200,
            n_test: 50,
            range: 0.1,
            sigma2: 1.0,
            x_sd: 3.0,
            family: GeneratorFamily::BetaRectangular { alpha: 0.2, phi: 10.0 },
            iterations: 3000,
            burnin: 600,
            master_seed,
        }
    }

    fn chain_options(&self) -> MixedOptions {
        MixedOptions {
            chain: GibbsOptions {
                iterations: self.iterations,
                burnin: self.burnin,
                ..GibbsOptions::default()
            },
            ..MixedOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::invalid("need at least 2 replicates for Monte Carlo errors"));
        }
        if self.n_train < 3 || self.n_test == 0 {
            return Err(Error::invalid("spatial study needs n_train >= 3 and n_test >= 1"));
        }
        self.chain_options().validate()?;
        let kept = self.iterations - self.burnin;
        if kept < 10 {
            return Err(Error::invalid(format!(
                "kept chain of {kept} sweeps is too short for the effective-sample-size metric"
            )));
        }
        Ok(())
    }
}

/// Per-model summary of the spatial prediction study.
#[derive(Debug, Clone)]
pub struct Table2Row {
    pub model: SpatialModel,
    /// Bias/RMSE of the posterior-mean slope plus predictive scores
    /// (negative test log-likelihood, MSPE) and the coefficient chain's
    /// multivariate effective sample size, all averaged over replicates.
    pub report: MetricReport,
    pub bias_mcse: f64,
    pub rmse_mcse: f64,
    pub negtestll_mcse: f64,
    pub mspe_mcse: f64,
    pub mess_mcse: f64,
    /// Mean wall-clock seconds per fit (sampling plus prediction).
    pub mean_seconds: f64,
    pub used: usize,
    pub failures: usize,
    /// Successful replicates as (replicate index, metrics) pairs, in
    /// replicate order.
    pub per_replicate: Vec<(usize, SpatialFitMetrics)>,
}

/// Scores of one model on one replicate of the spatial study.
#[derive(Debug, Clone, Copy)]
pub struct SpatialFitMetrics {
    /// Posterior-mean slope minus the generating slope.
    pub error: f64,
    /// Negative held-out log-likelihood.
    pub negtestll: f64,
    /// Mean squared prediction error of the held-out conditional mean.
    pub mspe: f64,
    /// Multivariate effective sample size of the coefficient chain.
    pub mess: f64,
    /// Wall-clock seconds for sampling plus prediction.
    pub seconds: f64,
}

/// Run the spatial prediction study; returns one row per model, shared
/// dispersion first.
pub fn run_table2(config: &Table2Config) -> Result<Vec<Table2Row>> {
    config.validate()?;
    let outcomes: Vec<[Result<SpatialFitMetrics>; 2]> = (0..config.replicates)
        .into_par_iter()
        .map(|replicate| spatial_replicate(config, replicate as u64))
        .collect();

    let mut rows = Vec::with_capacity(2);
    for (slot, model) in [(0, SpatialModel::Cobin), (1, SpatialModel::Micobin)] {
        let per_model: Vec<_> = outcomes.iter().map(|pair| pair[slot].as_ref()).collect();
        rows.push(summarize_spatial(model, per_model)?);
    }
    Ok(rows)
}

/// Stream tags for one replicate's independent randomness sources.
fn spatial_stream(replicate: u64, purpose: u64) -> u64 {
    (0xB << 60) | (replicate << 3) | purpose
}

fn spatial_replicate(config: &Table2Config, replicate: u64) -> [Result<SpatialFitMetrics>; 2] {
    let spec = DataGeneratorSpec {
        family: config.family,
        link: Link::Cobit,
        beta_true: DVector::from_column_slice(&[0.0, 1.0]),
        x_sd: config.x_sd,
        n: config.n_train + config.n_test,
        spatial: Some(SpatialSpec { sigma2: config.sigma2, range: config.range }),
    };
    let mut data_rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    data_rng.set_stream(spatial_stream(replicate, 0));

    let prepared = generate(&spec, &mut data_rng).and_then(|data| {
        let n_train = config.n_train;
        let n_test = config.n_test;
        let coords = data.coords.as_ref().expect("spatial spec returns coordinates");
        let kernel = ExponentialKernel::new(coords[..n_train].to_vec(), config.range)?;
        Ok((
            data.x.rows(0, n_train).clone_owned(),
            data.y.rows(0, n_train).clone_owned(),
            data.x.rows(n_train, n_test).clone_owned(),
            data.y.rows(n_train, n_test).clone_owned(),
            data.mu.rows(n_train, n_test).clone_owned(),
            coords[n_train..].to_vec(),
            kernel,
        ))
    });
    let (x, y, x_test, y_test, mu_test, test_coords, kernel) = match prepared {
        Ok(parts) => parts,
        Err(e) => {
            let msg = format!("data generation failed: {e}");
            return [Err(Error::Numeric(msg.clone())), Err(Error::Numeric(msg))];
        }
    };

    let priors = match MixedPriors::standard(2) {
        Ok(p) => p,
        Err(e) => {
            let msg = format!("prior construction failed: {e}");
            return [Err(Error::invalid(msg.clone())), Err(Error::invalid(msg))];
        }
    };
    let options = config.chain_options();
    let design = RandomEffectDesign::Identity;
    let structure = RandomEffectStructure::Kernel(kernel.clone());

    let run = |model: SpatialModel, chain_tag: u64, predict_tag: u64| {
        let mut chain_rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        chain_rng.set_stream(spatial_stream(replicate, chain_tag));
        let start = Instant::now();
        let draws = match model {
            SpatialModel::Cobin => {
                sample_cobin_mixed(&x, &y, &design, &structure, &priors, &options, &mut chain_rng)
            }
            SpatialModel::Micobin => {
                sample_micobin_mixed(&x, &y, &design, &structure, &priors, &options, &mut chain_rng)
            }
        }?;
        let mut predict_rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        predict_rng.set_stream(spatial_stream(replicate, predict_tag));
        let predictive =
            predict_spatial(&draws, &kernel, &x_test, &test_coords, &mut predict_rng)?;
        let seconds = start.elapsed().as_secs_f64();

        Ok(SpatialFitMetrics {
            error: draws.beta_mean()[1] - 1.0,
            negtestll: negtestll(&predictive.eta, &draws.dispersion, &y_test, 70)?,
            mspe: mspe(&predictive.eta, &mu_test)?,
            mess: multivariate_ess(&draws.beta)?,
            seconds,
        })
    };

    [run(SpatialModel::Cobin, 1, 2), run(SpatialModel::Micobin, 3, 4)]
}

fn summarize_spatial(
    model: SpatialModel,
    outcomes: Vec<std::result::Result<&SpatialFitMetrics, &Error>>,
) -> Result<Table2Row> {
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    let per_replicate: Vec<(usize, SpatialFitMetrics)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| o.as_ref().ok().map(|m| (r, **m)))
        .collect();
    let reps: Vec<&SpatialFitMetrics> = outcomes.into_iter().flatten().collect();
    let used = reps.len();
    if used < 2 {
        return Err(Error::Numeric(format!(
            "too few successful {} replicates ({used}); {failures} failed",
            model.name()
        )));
    }
    let errors: Vec<Result<f64>> = reps.iter().map(|r| Ok(r.error)).collect();
    let stats = summarize_errors(errors)?;
    let mean_se = |values: Vec<f64>| {
        let nf = values.len() as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        (mean, (var / nf).sqrt())
    };
    let (ntll, ntll_se) = mean_se(reps.iter().map(|r| r.negtestll).collect());
    let (msp, msp_se) = mean_se(reps.iter().map(|r| r.mspe).collect());
    let (mess, mess_se) = mean_se(reps.iter().map(|r| r.mess).collect());
    let seconds = reps.iter().map(|r| r.seconds).sum::<f64>() / used as f64;

    Ok(Table2Row {
        model,
        report: MetricReport {
            bias: stats.bias,
            rmse: stats.rmse,
            negtestll: Some(ntll),
            mspe: Some(msp),
            mess: Some(mess),
            waic: None,
        },
        bias_mcse: stats.bias_mcse,
        rmse_mcse: stats.rmse_mcse,
        negtestll_mcse: ntll_se,
        mspe_mcse: msp_se,
        mess_mcse: mess_se,
        mean_seconds: seconds,
        used,
        failures,
        per_replicate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_summaries_count_failures_and_stay_exact() {
        let outcomes: Vec<Result<f64>> = vec![
            Ok(0.1),
            Err(Error::Numeric("diverged".into())),
            Ok(-0.1),
            Ok(0.3),
            Err(Error::Numeric("diverged".into())),
        ];
        let stats = summarize_errors(outcomes).unwrap();
        assert_eq!(stats.used, 3);
        assert_eq!(stats.failures, 2);
        assert!((stats.bias - 0.1).abs() < 1e-15);
        let expected_rmse = ((0.01f64 + 0.01 + 0.09) / 3.0).sqrt();
        assert!((stats.rmse - expected_rmse).abs() < 1e-15);
        assert!(stats.bias_mcse > 0.0 && stats.rmse_mcse > 0.0);

        // All-failed and nearly-all-failed cells refuse to summarize.
        let all_failed: Vec<Result<f64>> =
            vec![Err(Error::Numeric("x".into())), Err(Error::Numeric("x".into()))];
        assert!(summarize_errors(all_failed).is_err());
    }

    #[test]
    fn invalid_study_configurations_are_rejected() {
        let mut config = Table1Config::study_defaults(1, 8);
        config.replicates = 1;
        assert!(run_table1(&config).is_err());

        let mut config = Table1Config::study_defaults(1, 8);
        config.sample_sizes = vec![2];
        assert!(run_table1(&config).is_err());

        let mut config = Table2Config::study_defaults(1, 4);
        config.burnin = config.iterations;
        assert!(run_table2(&config).is_err());

        let mut config = Table2Config::study_defaults(1, 4);
        config.iterations = config.burnin + 5;
        assert!(run_table2(&config).is_err());
    }

    #[test]
    fn a_small_robustness_cell_reproduces_exactly() {
        let config = Table1Config {
            families: vec![GeneratorFamily::Cobin { lambda: 3 }],
            links: vec![Link::Cobit],
            sample_sizes: vec![150],
            replicates: 24,
            master_seed: 99,
        };
        let first = run_table1(&config).unwrap();
        let second = run_table1(&config).unwrap();
        assert_eq!(first.len(), 1);
        let (a, b) = (&first[0], &second[0]);
        assert_eq!(a.report.bias.to_bits(), b.report.bias.to_bits());
        assert_eq!(a.report.rmse.to_bits(), b.report.rmse.to_bits());
        assert_eq!(a.used, 24);
        assert_eq!(a.failures, 0);
        // Correctly specified model at n = 150: the slope estimate should
        // sit well within a tenth of the truth on average.
        assert!(a.report.bias.abs() < 0.1, "bias {}", a.report.bias);
        assert!(a.report.rmse < 0.25, "rmse {}", a.report.rmse);
        assert!(a.bias_mcse > 0.0 && a.rmse_mcse > 0.0);
    }

    #[test]
    fn a_micro_spatial_study_pairs_both_models() {
        let config = Table2Config {
            replicates: 2,
            n_train: 36,
            n_test: 8,
            range: 0.15,
            sigma2: 1.0,
            x_sd: 3.0,
            family: GeneratorFamily::BetaRectangular { alpha: 0.2, phi: 10.0 },
            iterations: 260,
            burnin: 60,
            master_seed: 5,
        };
        let rows = run_table2(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].model, SpatialModel::Cobin);
        assert_eq!(rows[1].model, SpatialModel::Micobin);
        for row in &rows {
            assert_eq!(row.used, 2);
            assert_eq!(row.failures, 0);
            assert!(row.report.bias.is_finite());
            assert!(row.report.rmse.is_finite());
            let ntll = row.report.negtestll.unwrap();
            let msp = row.report.mspe.unwrap();
            let mess = row.report.mess.unwrap();
            assert!(ntll.is_finite(), "{} negtestll {ntll}", row.model.name());
            assert!(msp >= 0.0 && msp < 0.25, "{} mspe {msp}", row.model.name());
            assert!(mess > 5.0, "{} mess {mess}", row.model.name());
            assert!(row.mean_seconds > 0.0);
        }

        // Bit-reproducible across runs.
        let again = run_table2(&config).unwrap();
        assert_eq!(
            rows[0].report.bias.to_bits(),
            again[0].report.bias.to_bits()
        );
        assert_eq!(
            rows[1].report.negtestll.unwrap().to_bits(),
            again[1].report.negtestll.unwrap().to_bits()
        );
    }
}
