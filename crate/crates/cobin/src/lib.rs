//! Regression for proportions in `[0, 1]` with the continuous binomial (cobin)
//! exponential dispersion family and its boundary-friendly mixture (micobin).
//!
//! The crate provides:
//!
//! - [`dist`]: cobin and micobin densities, distribution functions, quantiles
//!   and exact samplers, plus the cumulant machinery behind the cobit link.
//! - [`kg`]: an exact rejection sampler for the Kolmogorov-Gamma distribution,
//!   the augmentation variable that makes all conditionals conjugate.
//! - [`fit`]: maximum likelihood / MAP fitting (IRLS and an EM algorithm built
//!   on the same augmentation) with canonical or logit links.
//! - [`gibbs`]: Gibbs samplers for fixed-effects and spatial / grouped mixed
//!   models, including prediction at new locations.
//! - [`eval`]: data generators, predictive metrics, residual diagnostics and
//!   the simulation-study drivers.
//! - [`cli`]: configuration parsing and execution behind the `cobin` binary.
//!
//! # Example
//!
//! ```
//! use cobin::dist::Cobin;
//! use rand::SeedableRng;
//!
//! let d = Cobin::new(1.5, 3).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let y = d.sample(&mut rng);
//! assert!(y > 0.0 && y < 1.0);
//! assert!((d.cdf(d.quantile(0.3).unwrap()).unwrap() - 0.3).abs() < 1e-9);
//! ```

pub mod cli;
pub mod dist;
pub mod eval;
pub mod fit;
pub mod gibbs;
pub mod kg;

mod dd;
mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
