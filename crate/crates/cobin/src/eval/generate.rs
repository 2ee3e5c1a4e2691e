//! Synthetic data generators for the robustness experiments.
//!
//! Four response families share one regression backbone: a design matrix
//! `X = [1, x]` with `x_i ~ N(0, x_sd^2)`, a linear predictor
//! `eta_i = x_i' beta (+ u_i)` and a mean `mu_i = g^{-1}(eta_i)`. The
//! families differ only in how `y_i` is drawn around that mean — every one
//! of them satisfies `E[y_i | mu_i] = mu_i` exactly, so mean-model
//! estimators can be compared across correctly and incorrectly specified
//! response distributions.
//!
//! The optional spatial block adds a zero-mean Gaussian process
//! `u ~ N(0, sigma2 * R)` over locations drawn uniformly on the unit
//! square, with the exponential correlation `R_ij = exp(-||s_i - s_j|| /
//! range)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::beta::ln_beta;

use crate::dist::{cobit_link, Cobin};
use crate::fit::Link;
use crate::gibbs::ExponentialKernel;
use crate::{Error, Result};

/// Response family of a data generator, with its non-mean parameters.
///
/// All densities are parameterized by the conditional mean `mu`; `phi` is a
/// beta precision (the sum of the two beta shapes `mu*phi` and
/// `(1-mu)*phi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorFamily {
    /// `Beta(mu * phi, (1 - mu) * phi)`.
    Beta { phi: f64 },
    /// Continuous binomial with natural parameter matched to the mean.
    Cobin { lambda: u32 },
    /// Beta-rectangular: a beta component with probability
    /// `w = 1 - alpha * (1 - |2 mu - 1|)` and a uniform contaminant
    /// otherwise. The beta component's mean `(mu - 0.5 + 0.5 w) / w` is
    /// tilted so the mixture mean stays exactly `mu`.
    BetaRectangular { alpha: f64, phi: f64 },
    /// Symmetric three-component beta mixture with weights
    /// `(1/4, 1/2, 1/4)` and component means `mu - eps, mu, mu + eps`,
    /// `eps = min(mu, 1 - mu) / 2`.
    BetaMixture { phi: f64 },
}

impl GeneratorFamily {
    /// Short name used in summary tables and CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorFamily::Beta { .. } => "beta",
            GeneratorFamily::Cobin { .. } => "cobin",
            GeneratorFamily::BetaRectangular { .. } => "brec",
            GeneratorFamily::BetaMixture { .. } => "bmix",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            GeneratorFamily::Beta { phi } => phi > 0.0 && phi.is_finite(),
            GeneratorFamily::Cobin { lambda } => lambda >= 1,
            GeneratorFamily::BetaRectangular { alpha, phi } => {
                alpha > 0.0 && alpha < 1.0 && phi > 0.0 && phi.is_finite()
            }
            GeneratorFamily::BetaMixture { phi } => phi > 0.0 && phi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid generator parameters: {self:?}")))
        }
    }

    /// One draw with conditional mean `mu in (0, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> Result<f64> {
        match *self {
            GeneratorFamily::Beta { phi } => sample_beta_mean(mu, phi, rng),
            GeneratorFamily::Cobin { lambda } => {
                Ok(Cobin::new(cobit_link(mu)?, lambda)?.sample(rng))
            }
            GeneratorFamily::BetaRectangular { alpha, phi } => {
                let w = rectangular_weight(mu, alpha);
                if rng.random::<f64>() < w {
                    sample_beta_mean(tilted_beta_mean(mu, w), phi, rng)
                } else {
                    Ok(rng.random::<f64>())
                }
            }
            GeneratorFamily::BetaMixture { phi } => {
                let eps = mu.min(1.0 - mu) / 2.0;
                let coin = rng.random::<f64>();
                let component = if coin < 0.25 {
                    mu - eps
                } else if coin < 0.75 {
                    mu
                } else {
                    mu + eps
                };
                sample_beta_mean(component, phi, rng)
            }
        }
    }

    /// Conditional density `p(y | mu)`, `y in (0, 1)`.
    ///
    /// Used by tests (mean preservation by quadrature) and by anyone
    /// computing an oracle log-score under the true data law.
    pub fn density(&self, y: f64, mu: f64) -> Result<f64> {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::invalid(format!("density wants y in (0, 1), got {y}")));
        }
        match *self {
            GeneratorFamily::Beta { phi } => Ok(beta_mean_density(y, mu, phi)),
            GeneratorFamily::Cobin { lambda } => {
                Ok(Cobin::new(cobit_link(mu)?, lambda)?.log_density(y)?.exp())
            }
            GeneratorFamily::BetaRectangular { alpha, phi } => {
                let w = rectangular_weight(mu, alpha);
                Ok(w * beta_mean_density(y, tilted_beta_mean(mu, w), phi) + (1.0 - w))
            }
            GeneratorFamily::BetaMixture { phi } => {
                let eps = mu.min(1.0 - mu) / 2.0;
                Ok(0.25 * beta_mean_density(y, mu - eps, phi)
                    + 0.5 * beta_mean_density(y, mu, phi)
                    + 0.25 * beta_mean_density(y, mu + eps, phi))
            }
        }
    }
}

/// Mixture weight of the beta component in the beta-rectangular family.
fn rectangular_weight(mu: f64, alpha: f64) -> f64 {
    1.0 - alpha * (1.0 - (2.0 * mu - 1.0).abs())
}

/// Mean of the beta component that keeps the beta-rectangular mixture mean
/// at `mu`: solves `w m + (1 - w) / 2 = mu`.
fn tilted_beta_mean(mu: f64, w: f64) -> f64 {
    (mu - 0.5 + 0.5 * w) / w
}

fn sample_beta_mean<R: Rng + ?Sized>(mu: f64, phi: f64, rng: &mut R) -> Result<f64> {
    let beta = rand_distr::Beta::new(mu * phi, (1.0 - mu) * phi)
        .map_err(|e| Error::invalid(format!("beta component (mu={mu}, phi={phi}): {e}")))?;
    Ok(beta.sample(rng))
}

fn beta_mean_density(y: f64, mu: f64, phi: f64) -> f64 {
    let (a, b) = (mu * phi, (1.0 - mu) * phi);
    ((a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p() - ln_beta(a, b)).exp()
}

/// Gaussian-process block of a generator: zero-mean spatial random effects
/// with exponential correlation on uniform random locations in `[0, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialSpec {
    /// Marginal variance of the random effect.
    pub sigma2: f64,
    /// Range of the exponential correlation `exp(-distance / range)`.
    pub range: f64,
}

/// Complete description of one synthetic regression dataset.
#[derive(Debug, Clone)]
pub struct DataGeneratorSpec {
    pub family: GeneratorFamily,
    pub link: Link,
    /// True coefficients; the first entry multiplies the intercept column.
    pub beta_true: DVector<f64>,
    /// Standard deviation of each non-intercept covariate.
    pub x_sd: f64,
    /// Number of observations.
    pub n: usize,
    /// Optional Gaussian-process random effects added to the linear
    /// predictor.
    pub spatial: Option<SpatialSpec>,
}

impl DataGeneratorSpec {
    fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.beta_true.is_empty() || self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta_true must be non-empty and finite"));
        }
        if !(self.x_sd.is_finite() && self.x_sd >= 0.0) {
            return Err(Error::invalid(format!("x_sd must be >= 0, got {}", self.x_sd)));
        }
        if self.n == 0 {
            return Err(Error::invalid("generator needs n >= 1"));
        }
        if let Some(spatial) = &self.spatial {
            if !(spatial.sigma2 > 0.0 && spatial.sigma2.is_finite()) {
                return Err(Error::invalid(format!(
                    "spatial variance must be positive, got {}",
                    spatial.sigma2
                )));
            }
            if !(spatial.range > 0.0 && spatial.range.is_finite()) {
                return Err(Error::invalid(format!(
                    "spatial range must be positive, got {}",
                    spatial.range
                )));
            }
        }
        Ok(())
    }
}

/// One simulated dataset: design, response, conditional means, and (for
/// spatial specs) the locations and latent surface that produced it.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    /// `n x p` design: intercept column followed by `N(0, x_sd^2)` draws.
    pub x: DMatrix<f64>,
    /// Responses in `(0, 1)` (cobin draws may touch the boundary only at
    /// dispersion 1, with probability zero).
    pub y: DVector<f64>,
    /// True conditional means `g^{-1}(eta_i)`.
    pub mu: DVector<f64>,
    /// Sampling locations, present iff the spec had a spatial block.
    pub coords: Option<Vec<[f64; 2]>>,
    /// Latent random effects, present iff the spec had a spatial block.
    pub u: Option<DVector<f64>>,
}

/// Draw one dataset from `spec`.
pub fn generate<R: Rng + ?Sized>(spec: &DataGeneratorSpec, rng: &mut R) -> Result<GeneratedData> {
    spec.validate()?;
    let n = spec.n;
    let p = spec.beta_true.len();

    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..p {
            let z: f64 = StandardNormal.sample(rng);
            x[(i, j)] = spec.x_sd * z;
        }
    }

    let mut eta = &x * &spec.beta_true;

    let (coords, u) = match &spec.spatial {
        None => (None, None),
        Some(spatial) => {
            let coords: Vec<[f64; 2]> =
                (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
            let kernel = ExponentialKernel::new(coords.clone(), spatial.range)?;
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let u = spatial.sigma2.sqrt() * kernel.correlation_cholesky() * z;
            eta += &u;
            (Some(coords), Some(u))
        }
    };

    let mut y = DVector::zeros(n);
    let mut mu = DVector::zeros(n);
    for i in 0..n {
        mu[i] = spec.link.mean(eta[i]);
        y[i] = spec.family.sample(mu[i], rng)?;
    }

    Ok(GeneratedData { x, y, mu, coords, u })
}
