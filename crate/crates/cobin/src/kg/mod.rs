//! The Kolmogorov-Gamma (KG) distribution family.
//!
//! KG(b, c) is the infinitely divisible law on `(0, inf)` with Laplace
//! transform
//!
//! ```text
//! E[exp(-t X)] = [ sinhc(c/2) / sinhc(sqrt(c^2/4 + t/2)) ]^b ,
//! sinhc(s) = sinh(s)/s ,
//! ```
//!
//! valid for `t > -(c^2/2 + 2 pi^2)` (the argument of the square root is
//! continued through zero as `sinc`). It is the mixing distribution that
//! makes regression with the canonical continuous-binomial link conditionally
//! Gaussian: mixing a normal kernel `N(y | m, 1/x)` over `x ~ KG(b, c)`
//! reproduces the likelihood kernel of the linear predictor, so Gibbs updates
//! for coefficients become ordinary weighted least squares.
//!
//! The module provides exact (rejection-based, no truncation error) sampling
//! [`sample_kg`], the mean [`kg_mean`], the Laplace transform [`kg_laplace`],
//! and series evaluators for the KG(1, c) density and distribution function
//! ([`kg1_density`], [`kg1_cdf`]) used by diagnostics and tests. The
//! distribution is even in `c` throughout.

mod gig;
mod sampler;
mod series;

pub use gig::gig_cdf;
pub(crate) use gig::erfc;
pub use sampler::{
    expected_proposals, sample_kg, sample_kg1, sample_kg1_with_stats, sample_kg_with_stats,
    KgStats,
};
pub use series::{kg1_cdf, kg1_density, KgEnvelope};

use crate::{Error, Result};

/// `sqrt(pi)` (not provided by `std::f64::consts`).
pub(crate) const SQRT_PI: f64 = 1.7724538509055160273;

/// `ln sinhc(s)` parameterized by `s2 = s^2`, so a single code path covers
/// the hyperbolic branch (`s2 > 0`), the removable singularity at zero, and
/// the trigonometric continuation `ln sinc(x)` at `s2 = -x^2 < 0`.
///
/// The function is analytic in `s2` on `(-pi^2, inf)`; arguments at or below
/// `-pi^2` (where `sinc` hits its first zero) are rejected.
pub(crate) fn ln_sinhc_s2(s2: f64) -> Result<f64> {
    if !(s2 > -(std::f64::consts::PI.powi(2)) * (1.0 - 1e-10)) {
        return Err(Error::invalid(format!(
            "ln sinhc requires s^2 > -pi^2, got {s2}"
        )));
    }
    if s2.abs() < 0.25 {
        // Even Taylor series of sinhc in s, i.e. a power series in s2 with
        // coefficients 1/(2k+1)!; truncation below 5e-20 at |s2| = 0.25.
        let p = s2
            * (1.0 / 6.0
                + s2 * (1.0 / 120.0
                    + s2 * (1.0 / 5040.0
                        + s2 * (1.0 / 362_880.0
                            + s2 * (1.0 / 39_916_800.0
                                + s2 * (1.0 / 6_227_020_800.0
                                    + s2 / 1_307_674_368_000.0))))));
        Ok(p.ln_1p())
    } else if s2 > 0.0 {
        let x = s2.sqrt();
        Ok(x + (-(-2.0 * x).exp()).ln_1p() - (2.0 * x).ln())
    } else {
        let x = (-s2).sqrt();
        Ok((x.sin() / x).ln())
    }
}

/// Mean of KG(b, c): `b ((c/2) coth(c/2) - 1) / c^2`, equal to `b / 12` at
/// `c = 0` and decaying like `b / (2|c|)` for strong tilts.
///
/// The subtraction in the closed form cancels catastrophically for small
/// `|c|`, so with `x = |c|/2` the numerator is rewritten as
/// `x cosh x - sinh x = sum_{k>=1} 2k x^{2k+1} / (2k+1)!`, a positive-term
/// series used for `x <= 2`; above that the direct difference is benign
/// until `cosh` overflows, where `coth x = 1` holds to full precision.
pub fn kg_mean(b: u32, c: f64) -> f64 {
    let b = f64::from(b);
    let c2 = c * c;
    let x = c.abs() / 2.0;
    if c.abs() <= 1e-3 {
        b * (1.0 / 12.0 - c2 / 720.0)
    } else if x <= 2.0 {
        let x2 = x * x;
        let mut term = x * x2 / 3.0;
        let mut numerator = term;
        let mut k = 1.0f64;
        while term > 1e-18 * numerator {
            term *= x2 * (k + 1.0) / (k * (2.0 * k + 2.0) * (2.0 * k + 3.0));
            numerator += term;
            k += 1.0;
        }
        b * numerator / (x.sinh() * c2)
    } else if x <= 20.0 {
        b * (x * x.cosh() - x.sinh()) / (x.sinh() * c2)
    } else {
        // coth x = 1 within 2e-18 here.
        b * (x - 1.0) / c2
    }
}

/// Laplace transform `E[exp(-t X)]` of KG(b, c), for `t` in the convergence
/// region `t > -(c^2/2 + 2 pi^2)`. Defined for negative `t` (moment
/// generating function) up to that boundary, where it diverges.
pub fn kg_laplace(b: u32, c: f64, t: f64) -> Result<f64> {
    if !c.is_finite() || !t.is_finite() {
        return Err(Error::invalid(format!(
            "laplace transform arguments must be finite, got c = {c}, t = {t}"
        )));
    }
    let s2_num = c * c / 4.0;
    let s2_den = c * c / 4.0 + t / 2.0;
    let ln_ratio = ln_sinhc_s2(s2_num)? - ln_sinhc_s2(s2_den).map_err(|_| {
        Error::invalid(format!(
            "laplace transform of KG({b}, {c}) diverges at t = {t} \
             (requires t > -(c^2/2 + 2 pi^2))"
        ))
    })?;
    Ok((f64::from(b) * ln_ratio).exp())
}
