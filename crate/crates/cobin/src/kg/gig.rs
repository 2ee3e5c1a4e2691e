//! The generalized-inverse-Gaussian leg of the exact sampler
//!
//! The left-region proposal is `GIG(-3/2, c^2, 1/4)`, whose density is
//! proportional to `x^{-5/2} exp(-(c^2 x + 1/(4x))/2)`. Everything here is
//! closed-form-first: the distribution function reduces to complementary
//! error functions (so envelope weights are exact, not quadrature), and
//! draws come from a ratio-of-uniforms sampler on the reciprocal standard
//! form `GIG(3/2, omega, omega)` with `omega = |c|/2`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::{Error, Result};

/// Rejection attempts allowed when truncating the proposal to `(0, t)`, and
/// for the ratio-of-uniforms accept loop. The worst acceptance rate over all
/// `c` is ~0.17 per truncation draw, so 10^4 attempts failing indicates a
/// genuine defect rather than bad luck.
const MAX_REJECTION_ROUNDS: usize = 10_000;

/// `erf(x)` by its everywhere-convergent positive-term expansion
/// `erf(x) = (2x/sqrt(pi)) e^{-x^2} sum_k (2x^2)^k / (2k+1)!!`.
/// No cancellation; used for small arguments.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 0u32;
    while term > 1e-18 * sum {
        term *= two_x2 / (2 * k + 3) as f64;
        sum += term;
        k += 1;
    }
    2.0 * x / crate::kg::SQRT_PI * (-x * x).exp() * sum
}

/// `erfcx(x) = e^{x^2} erfc(x)` for `x >= 1.5` by the Laplace continued
/// fraction `1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`,
/// evaluated with the modified Lentz recurrence.
fn erfcx_continued_fraction(x: f64) -> f64 {
    debug_assert!(x >= 1.5);
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = TINY;
    let mut d = 0.0f64;
    for n in 1..=400u32 {
        let a = if n == 1 { 1.0 } else { (n - 1) as f64 / 2.0 };
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    f / crate::kg::SQRT_PI
}

/// Complementary error function, any sign, ~1e-15 relative down to the
/// underflow threshold.
pub(crate) fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.5 {
        1.0 - erf_series(x)
    } else {
        (-x * x).exp() * erfcx_continued_fraction(x)
    }
}

/// Scaled complementary error function `e^{x^2} erfc(x)` for `x >= 0`.
pub(crate) fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1.5 {
        (x * x).exp() * (1.0 - erf_series(x))
    } else {
        erfcx_continued_fraction(x)
    }
}

/// `x^{-5/2}`-kernel partial integral, scaled by `e^{2AB}`:
///
/// ```text
/// e^{2AB} int_0^z s^{-5/2} e^{-A^2 s - B^2/s} ds =
///     sqrt(pi)/(4B^3) (erfc(u) + e^{-u^2} erfcx(v))
///   + A sqrt(pi)/(2B^2) (erfc(u) - e^{-u^2} erfcx(v))
///   + e^{-u^2} / (B^2 sqrt(z))
/// ```
///
/// with `u = B/sqrt(z) - A sqrt(z)`, `v = B/sqrt(z) + A sqrt(z)`. The
/// `e^{2AB}` scaling keeps every piece in range however large `A` gets.
pub(crate) fn half_integer_kernel_5(z: f64, a: f64, b: f64) -> f64 {
    let sz = z.sqrt();
    let u = b / sz - a * sz;
    let v = b / sz + a * sz;
    let eu2 = (-u * u).exp();
    let plus = erfc(u) + eu2 * erfcx(v);
    let minus = erfc(u) - eu2 * erfcx(v);
    crate::kg::SQRT_PI / (4.0 * b * b * b) * plus
        + a * crate::kg::SQRT_PI / (2.0 * b * b) * minus
        + eu2 / (b * b * sz)
}

/// `x^{-3/2}`-kernel partial integral, scaled by `e^{2AB}`:
///
/// ```text
/// e^{2AB} int_0^z s^{-3/2} e^{-A^2 s - B^2/s} ds
///     = sqrt(pi)/(2B) (erfc(u) + e^{-u^2} erfcx(v))
/// ```
pub(crate) fn half_integer_kernel_3(z: f64, a: f64, b: f64) -> f64 {
    let sz = z.sqrt();
    let u = b / sz - a * sz;
    let v = b / sz + a * sz;
    crate::kg::SQRT_PI / (2.0 * b) * (erfc(u) + (-u * u).exp() * erfcx(v))
}

/// Distribution function of `GIG(-3/2, c^2, 1/4)` — the left-region proposal
/// law — in closed form. The `e^{-|c|/(2)}`-sized prefactors cancel between
/// numerator and total mass, so this is stable for any `c`.
pub fn gig_cdf(x: f64, c: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return 1.0;
    }
    let a = c.abs() / std::f64::consts::SQRT_2;
    let b = 0.125f64.sqrt(); // 2^{-3/2}
    let numerator = half_integer_kernel_5(x, a, b);
    let total = crate::kg::SQRT_PI * (0.5 + a * b) / (b * b * b);
    (numerator / total).clamp(0.0, 1.0)
}

/// One draw of `GIG(-3/2, c^2, 1/4)` restricted to `(0, upper)` by rejection.
pub(crate) fn sample_gig_truncated<R: Rng + ?Sized>(
    rng: &mut R,
    c: f64,
    upper: f64,
) -> Result<f64> {
    for _ in 0..MAX_REJECTION_ROUNDS {
        let x = sample_gig(rng, c)?;
        if x < upper {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        context: "truncated inverse-kernel proposal rejection".into(),
        iterations: MAX_REJECTION_ROUNDS as u64,
    })
}

/// One draw of `GIG(-3/2, c^2, 1/4)`.
///
/// Via `X = 1/(2|c| T)` with `T ~ GIG(3/2, omega, omega)`, `omega = |c|/2`,
/// sampled by ratio-of-uniforms (mode-shifted once `omega > 3`). Below
/// `|c| = 1e-100` the law is indistinguishable from its inverse-gamma limit
/// `(1/8) / Gamma(3/2, 1)` and the standard-form mode `~1/omega` would
/// overflow, so the limit is used directly.
pub(crate) fn sample_gig<R: Rng + ?Sized>(rng: &mut R, c: f64) -> Result<f64> {
    let c = c.abs();
    if c < 1e-100 {
        let gamma = Gamma::new(1.5, 1.0).expect("fixed parameters are valid");
        return Ok(0.125 / gamma.sample(rng));
    }
    let omega = c / 2.0;
    let t = if omega <= 3.0 {
        ratio_of_uniforms_basic(rng, omega)?
    } else {
        ratio_of_uniforms_shifted(rng, omega)?
    };
    Ok(1.0 / (2.0 * c * t))
}

/// `log g(t)` for the unnormalized `GIG(3/2, omega, omega)` density
/// `g(t) = t^{1/2} exp(-omega (t + 1/t)/2)`.
#[inline]
fn log_gig_kernel(t: f64, omega: f64) -> f64 {
    0.5 * t.ln() - 0.5 * omega * (t + 1.0 / t)
}

/// Ratio-of-uniforms without shift, efficient for `omega <= 3`:
/// accept `(u, v)` with `u <= sqrt(g(v/u))` over the bounding box
/// `u <= sqrt(g(m))`, `v <= m2 sqrt(g(m2))` where `m` maximizes `g` and
/// `m2` maximizes `t^2 g(t)`. All comparisons run in log space so tiny
/// `omega` (mode `~1/omega`) cannot overflow.
fn ratio_of_uniforms_basic<R: Rng + ?Sized>(rng: &mut R, omega: f64) -> Result<f64> {
    let m = (0.5 + (0.25 + omega * omega).sqrt()) / omega;
    let m2 = (2.5 + (6.25 + omega * omega).sqrt()) / omega;
    let ln_u_max = 0.5 * log_gig_kernel(m, omega);
    let ln_v_max = m2.ln() + 0.5 * log_gig_kernel(m2, omega);
    let ratio_scale = (ln_v_max - ln_u_max).exp();
    for _ in 0..MAX_REJECTION_ROUNDS {
        let u = 1.0 - rng.random::<f64>(); // (0, 1]
        let v = rng.random::<f64>();
        let t = v / u * ratio_scale;
        if t > 0.0 && 2.0 * (u.ln() + ln_u_max) <= log_gig_kernel(t, omega) {
            return Ok(t);
        }
    }
    Err(Error::NoConvergence {
        context: "ratio-of-uniforms accept loop".into(),
        iterations: MAX_REJECTION_ROUNDS as u64,
    })
}

/// Mode-shifted ratio-of-uniforms for `omega > 3`, where the unshifted box
/// gets loose. Works with the relative kernel `g(t)/g(m)` so `u_max = 1`;
/// the `v` bounds come from the stationary points of `(t - m) sqrt(g)`,
/// the roots of a cubic located by the trigonometric (Cardano) formula.
fn ratio_of_uniforms_shifted<R: Rng + ?Sized>(rng: &mut R, omega: f64) -> Result<f64> {
    let lambda = 1.5f64;
    let m = ((lambda - 1.0) + ((lambda - 1.0).powi(2) + omega * omega).sqrt()) / omega;
    // Stationary points of (t-m)^2 g(t): t^3 + a t^2 + b t + c0 = 0.
    let a = -2.0 * (lambda + 1.0) / omega - m;
    let b = 2.0 * (lambda - 1.0) * m / omega - 1.0;
    let c0 = m;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c0;
    // Three real roots: one negative, two positive bracketing the mode.
    // The largest (k = 0) and middle (k = 1) trigonometric roots are the
    // two stationary points to the right and left of m.
    let s = (-p / 3.0).sqrt();
    let cos_arg = (-q / (2.0 * s * s * s)).clamp(-1.0, 1.0);
    let phi = cos_arg.acos();
    let y1 = 2.0 * s * (phi / 3.0).cos() - a / 3.0;
    let y2 = 2.0 * s * (phi / 3.0 - 2.0 * std::f64::consts::FRAC_PI_3).cos() - a / 3.0;
    debug_assert!(y2 > 0.0 && y2 < m && m < y1, "cubic roots out of order");
    let ln_gm = log_gig_kernel(m, omega);
    let relative = |t: f64| log_gig_kernel(t, omega) - ln_gm;
    let v_plus = (y1 - m) * (0.5 * relative(y1)).exp();
    let v_minus = (y2 - m) * (0.5 * relative(y2)).exp();
    for _ in 0..MAX_REJECTION_ROUNDS {
        let u = 1.0 - rng.random::<f64>(); // (0, 1]
        let v = v_minus + rng.random::<f64>() * (v_plus - v_minus);
        let t = m + v / u;
        if t > 0.0 && 2.0 * u.ln() <= relative(t) {
            return Ok(t);
        }
    }
    Err(Error::NoConvergence {
        context: "shifted ratio-of-uniforms accept loop".into(),
        iterations: MAX_REJECTION_ROUNDS as u64,
    })
}

/// Exponential variate helper shared by the right-region proposal.
pub(crate) fn sample_exp<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}
