//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s
//! carrying roughly 31 significant decimal digits.
//!
//! Only the handful of operations needed by the alternating-sum evaluators is
//! implemented. Products use Dekker's split rather than `mul_add` so the code
//! is exact (and fast) on targets without hardware fused multiply-add.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free sum assuming `|a| >= |b|`.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Dekker split of `a` into two 26-bit halves.
#[inline]
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Error-free product: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two `f64`s as a `Dd`.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, other.hi);
        let s2 = s2 + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        let s2 = s2 + self.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, other.hi);
        let p2 = p2 + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        let p2 = p2 + self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    /// Division by an `f64` with one Newton correction step.
    #[inline]
    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let e = ((self.hi - p1) - p2 + self.lo) / b;
        let (hi, lo) = quick_two_sum(q1, e);
        Dd { hi, lo }
    }

    /// Full double-double division with two correction steps.
    #[inline]
    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r1 = self.add(b.mul_f64(q1).neg());
        let q2 = r1.hi / b.hi;
        let r2 = r1.add(b.mul_f64(q2).neg());
        let q3 = r2.hi / b.hi;
        let (s, e) = two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }

    /// Exact scaling by a power of two.
    #[inline]
    pub fn ldexp(self, e: i32) -> Dd {
        let f = f64::powi(2.0, e);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    /// `hi + lo` collapsed to one `f64`.
    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Natural log of a positive `Dd`, accurate to ~1e-18 relative: an `f64`
    /// log plus one correction term, enough for a 1e-16-accurate log-density.
    pub fn ln(self) -> f64 {
        debug_assert!(self.hi > 0.0);
        let l = self.hi.ln();
        // ln(hi + lo) = ln(hi) + ln(1 + lo/hi)
        l + (self.lo / self.hi).ln_1p()
    }
}

/// A `Dd` mantissa together with a base-2 exponent, for products whose
/// magnitude exceeds the `f64` range. Invariant: `2^-512 <= |mantissa| < 2^512`
/// (or mantissa is zero).
#[derive(Clone, Copy, Debug)]
pub(crate) struct ScaledDd {
    pub mantissa: Dd,
    pub exp2: i64,
}

impl ScaledDd {
    pub const ZERO: ScaledDd = ScaledDd { mantissa: Dd::ZERO, exp2: 0 };

    pub fn from_dd(x: Dd) -> ScaledDd {
        let mut s = ScaledDd { mantissa: x, exp2: 0 };
        s.renormalize();
        s
    }

    /// Keep the mantissa inside `[2^-512, 2^512)` so products never overflow.
    #[inline]
    fn renormalize(&mut self) {
        let a = self.mantissa.hi.abs();
        if a == 0.0 {
            self.exp2 = 0;
        } else if a >= f64::powi(2.0, 512) {
            self.mantissa = self.mantissa.ldexp(-512);
            self.exp2 += 512;
        } else if a < f64::powi(2.0, -512) {
            self.mantissa = self.mantissa.ldexp(512);
            self.exp2 -= 512;
        }
    }

    pub fn mul_dd(mut self, x: Dd) -> ScaledDd {
        self.mantissa = self.mantissa.mul(x);
        self.renormalize();
        self
    }

    pub fn mul(mut self, other: ScaledDd) -> ScaledDd {
        self.mantissa = self.mantissa.mul(other.mantissa);
        self.exp2 += other.exp2;
        self.renormalize();
        self
    }

    pub fn div_f64(mut self, b: f64) -> ScaledDd {
        self.mantissa = self.mantissa.div_f64(b);
        self.renormalize();
        self
    }

    pub fn div(mut self, other: ScaledDd) -> ScaledDd {
        self.mantissa = self.mantissa.div(other.mantissa);
        self.exp2 -= other.exp2;
        self.renormalize();
        self
    }

    /// Integer power by binary exponentiation.
    pub fn powi(base: Dd, mut n: u32) -> ScaledDd {
        let mut acc = ScaledDd::from_dd(Dd::ONE);
        let mut b = ScaledDd::from_dd(base);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(b);
            }
            n >>= 1;
            if n > 0 {
                b = b.mul(b);
            }
        }
        acc
    }

    /// Natural log of a positive scaled value.
    pub fn ln(self) -> f64 {
        self.mantissa.ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }

    /// Collapse to `f64`, saturating to zero / infinity outside its range.
    /// The power of two is applied in two halves so values whose mantissa and
    /// exponent straddle the representable range still land correctly.
    #[cfg(test)]
    pub fn to_f64(self) -> f64 {
        let e = self.exp2.clamp(-2_400, 2_400);
        let h = (e / 2) as i32;
        self.mantissa.to_f64() * f64::powi(2.0, h) * f64::powi(2.0, e as i32 - h)
    }

    /// Collapse to a `Dd`, saturating outside the `f64` range.
    pub fn to_dd(self) -> Dd {
        let e = self.exp2.clamp(-2_400, 2_400);
        let f = f64::powi(2.0, (e / 2) as i32);
        let g = f64::powi(2.0, (e - e / 2) as i32);
        Dd { hi: self.mantissa.hi * f * g, lo: self.mantissa.lo * f * g }
    }
}

/// ln 2 to double-double precision.
const LN2_DD: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462995584e-17 };

/// `exp(x)` as a scaled double-double, valid far beyond the `f64` exponent
/// range. The argument is a `Dd` because an *absolute* error in the exponent
/// becomes a *relative* error in the result: products like `theta * k` must
/// keep their low word, and the range reduction must run in double-double.
pub(crate) fn exp_scaled(x: Dd) -> ScaledDd {
    debug_assert!(x.hi.abs() < 4e18, "exp_scaled argument out of range");
    let k = (x.hi / std::f64::consts::LN_2).round();
    let r = x.add(LN2_DD.mul_f64(k).neg());
    let e = r.hi.exp();
    // |r.lo| < 2^-53, so e * (1 + r.lo) stays a normalized double-double.
    let mut s = ScaledDd { mantissa: Dd { hi: e, lo: e * r.lo }, exp2: k as i64 };
    s.renormalize();
    s
}

/// Sign-aware sum of `ScaledDd` terms in a sliding common-exponent frame,
/// with a digits-lost monitor for alternating series. Terms of wildly
/// different magnitude are safe: the frame follows the largest term and
/// anything more than ~1070 binary orders below it flushes to zero.
pub(crate) struct ScaledSum {
    acc: Dd,
    abs: f64,
    exp2: i64,
    started: bool,
}

impl ScaledSum {
    pub fn new() -> ScaledSum {
        ScaledSum { acc: Dd::ZERO, abs: 0.0, exp2: 0, started: false }
    }

    pub fn add(&mut self, negative: bool, mut term: ScaledDd) {
        if term.mantissa.hi == 0.0 {
            return;
        }
        if !self.started {
            self.exp2 = term.exp2;
            self.started = true;
        }
        if term.exp2 > self.exp2 {
            // Rescale the accumulator down into the new term's frame.
            let shift = (self.exp2 - term.exp2).max(-1_070) as i32;
            self.acc = self.acc.ldexp(shift);
            self.abs *= f64::powi(2.0, shift);
            self.exp2 = term.exp2;
        } else {
            let shift = (term.exp2 - self.exp2).max(-1_070) as i32;
            term.mantissa = term.mantissa.ldexp(shift);
        }
        self.abs += term.mantissa.hi.abs();
        self.acc = if negative {
            self.acc.add(term.mantissa.neg())
        } else {
            self.acc.add(term.mantissa)
        };
        if self.acc.hi.abs() >= f64::powi(2.0, 512) || self.abs >= f64::powi(2.0, 512) {
            self.acc = self.acc.ldexp(-512);
            self.abs *= f64::powi(2.0, -512);
            self.exp2 += 512;
        }
    }

    /// True when no nonzero term was ever added.
    pub fn is_zero(&self) -> bool {
        self.abs == 0.0
    }

    /// Decimal digits cancelled: `log10(sum |t|) - log10(sum t)`. Infinite
    /// when a nonzero absolute mass collapsed to a non-positive total.
    pub fn digits_lost(&self) -> f64 {
        if self.abs == 0.0 {
            0.0
        } else if self.acc.hi <= 0.0 {
            f64::INFINITY
        } else {
            (self.abs / self.acc.hi).log10().max(0.0)
        }
    }

    /// The signed total (zero if nothing nonzero was added).
    pub fn total(&self) -> ScaledDd {
        let mut v = ScaledDd { mantissa: self.acc, exp2: self.exp2 };
        v.renormalize();
        v
    }

    /// `ln` of a strictly positive total.
    pub fn ln_positive(&self) -> Option<f64> {
        if self.abs == 0.0 || self.acc.hi <= 0.0 {
            None
        } else {
            Some(self.acc.ln() + self.exp2 as f64 * std::f64::consts::LN_2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_prod_is_exact() {
        // 1/3 * 1/7 in double-double should recover the f64 rounding error.
        let p = Dd::prod(1.0 / 3.0, 1.0 / 7.0);
        let exact = 1.0 / 3.0 * (1.0 / 7.0);
        assert_eq!(p.hi, exact);
        assert!(p.lo.abs() > 0.0 && p.lo.abs() < 1e-17);
    }

    #[test]
    fn dd_sum_tracks_cancellation() {
        // (1e16 + 1) - 1e16 = 1 exactly in double-double.
        let s = Dd::from_f64(1e16).add_f64(1.0).add_f64(-1e16);
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn dd_div_roundtrips() {
        let x = Dd::prod(std::f64::consts::PI, std::f64::consts::E);
        let y = x.div_f64(std::f64::consts::E);
        assert!((y.to_f64() - std::f64::consts::PI).abs() < 1e-16);
        assert!((y.hi - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn scaled_pow_handles_huge_exponents() {
        // 3^800 overflows f64 (~10^381); the scaled form must not.
        let p = ScaledDd::powi(Dd::from_f64(3.0), 800);
        let expected_log = 800.0 * 3f64.ln();
        assert!((p.ln() - expected_log).abs() < 1e-12 * expected_log);

        // Tiny base: 0.001^400 ~ 10^-1200.
        let q = ScaledDd::powi(Dd::from_f64(1e-3), 400);
        assert!((q.ln() - 400.0 * 1e-3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn scaled_pow_matches_f64_in_range() {
        let p = ScaledDd::powi(Dd::from_f64(1.7), 10);
        let exact = 1.7f64.powi(10);
        let v = p.mantissa.to_f64() * f64::powi(2.0, p.exp2 as i32);
        assert!((v - exact).abs() <= 1e-13 * exact);
    }

    #[test]
    fn full_dd_division() {
        // (1/3) / (1/7) = 7/3 to double-double accuracy.
        let q = Dd::ONE.div_f64(3.0).div(Dd::ONE.div_f64(7.0));
        let r = q.add(Dd::from_f64(7.0).div_f64(3.0).neg());
        assert!(r.to_f64().abs() < 1e-30);
    }

    #[test]
    fn exp_scaled_tracks_huge_and_tiny_arguments() {
        for x in [0.0f64, 1.0, -3.5, 80.0, -700.0, 5000.0, -20000.0] {
            let e = exp_scaled(Dd::from_f64(x));
            assert!(
                (e.ln() - x).abs() <= 1e-13 * (1.0 + x.abs()),
                "exp_scaled({x}) off: ln = {}",
                e.ln()
            );
        }
        // In-range values collapse to the f64 exponential within 2 ulps.
        let v = exp_scaled(Dd::from_f64(3.7)).to_f64();
        assert!((v - 3.7f64.exp()).abs() <= 2e-15 * v);
    }

    #[test]
    fn exp_scaled_keeps_low_word_of_argument() {
        // A 1e-13 low word on a large argument must shift the result by the
        // same relative amount; an f64-collapsed argument would discard it.
        let base = exp_scaled(Dd { hi: 100.0, lo: 0.0 });
        let bumped = exp_scaled(Dd { hi: 100.0, lo: 1e-13 });
        assert_eq!(base.exp2, bumped.exp2);
        let ratio = bumped.mantissa.to_f64() / base.mantissa.to_f64();
        assert!((ratio - 1.0 - 1e-13).abs() < 1e-15, "ratio = {ratio}");
    }

    #[test]
    fn scaled_sum_survives_cancellation_within_its_digits() {
        // 1e12 + 3.25 - 1e12: a 12-digit cancellation is loose change for
        // the ~32-digit accumulator, and the monitor reports it honestly.
        let mut s = ScaledSum::new();
        s.add(false, ScaledDd::from_dd(Dd::from_f64(1e12)));
        s.add(false, ScaledDd::from_dd(Dd::from_f64(3.25)));
        s.add(true, ScaledDd::from_dd(Dd::from_f64(1e12)));
        assert_eq!(s.total().to_f64(), 3.25);
        assert!((s.digits_lost() - (2e12f64 / 3.25).log10()).abs() < 0.01);
        assert_eq!(s.ln_positive().unwrap(), 3.25f64.ln());
    }

    #[test]
    fn scaled_sum_slides_its_frame_across_magnitudes() {
        // Huge pair cancels exactly; a term 10 orders further down survives
        // and the digits-lost monitor sees the full absolute mass.
        let mut s = ScaledSum::new();
        let big = ScaledDd::powi(Dd::from_f64(10.0), 200);
        let small = ScaledDd::powi(Dd::from_f64(10.0), 190);
        s.add(false, big);
        s.add(true, big);
        s.add(false, small);
        assert!((s.ln_positive().unwrap() - 190.0 * 10f64.ln()).abs() < 1e-10);
        let lost = s.digits_lost();
        assert!(lost > 10.0 && lost < 11.0, "digits lost = {lost}");
    }

    #[test]
    fn scaled_sum_flags_nonpositive_totals() {
        let mut s = ScaledSum::new();
        assert!(s.is_zero());
        s.add(true, ScaledDd::from_dd(Dd::ONE));
        assert!(!s.is_zero());
        assert!(s.ln_positive().is_none());
        assert!(s.digits_lost().is_infinite());
    }

    #[test]
    fn scaled_collapse_to_f64_saturates() {
        let huge = ScaledDd::powi(Dd::from_f64(10.0), 4000);
        assert!(huge.to_f64().is_infinite());
        let tiny = ScaledDd::powi(Dd::from_f64(0.1), 4000);
        assert_eq!(tiny.to_f64(), 0.0);
        // Straddling case: mantissa 2^511 with frame exponent -1500 is 2^-989.
        let v = ScaledDd { mantissa: Dd::from_f64(f64::powi(2.0, 511)), exp2: -1_500 };
        assert_eq!(v.to_f64(), f64::powi(2.0, -989));
    }
}
