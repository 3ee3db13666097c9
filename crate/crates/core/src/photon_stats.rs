//! Photon-number statistics and scalar special functions.
//!
//! A weak coherent pulse of mean intensity `X` carries `l` photons with
//! Poisson probability `pmf(X, l) = e^-X X^l / l!`. Everything the
//! budget engine needs downstream — sifted-bit expectations, attack
//! bounds, privacy-amplification margins — reduces to these mass
//! functions, their upper tails, the binary entropy, and the (inverse)
//! error function. They are implemented here once, carefully, and the
//! rest of the crate treats them as exact.
//!
//! Numerical strategy, chosen so that no branch suffers catastrophic
//! cancellation or spurious overflow anywhere in the supported domain:
//!
//! - pmf: interleaved product `e^-X * (X/1) * (X/2) * ...` whose partial
//!   products are themselves probabilities (never overflow); log-space
//!   fallback when `e^-X` underflows or `l` is large.
//! - tail `k = 1`: `-expm1(-X)`, exact for both tiny and huge `X`.
//! - tail `k = 2`: an explicit series for small `X` (avoiding the
//!   `1 - e^-X - X e^-X` cancellation), the closed form otherwise.
//! - tail `k >= 3`: summed from the side of the mean that keeps every
//!   term positive and decreasing — upper sum when `k` sits above the
//!   mean, complement of the lower sum otherwise.
//! - `erf`: all-positive power series up to `|w| = 5.5`, asymptotic
//!   complementary expansion to `|w| = 6`, saturation beyond.
//! - `inverse_erf`: classic central/tail rational seed polished by four
//!   Newton steps against `erf`, giving full working precision.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Information measured in bits (alias to keep signatures legible).
pub type Bits<T> = T;

/// A probability, guaranteed to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability<T>(T);

impl<T: Real> Probability<T> {
    /// Wraps `value`, rejecting anything outside `[0, 1]` (or NaN).
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Probability(value))
        } else {
            Err(Error::domain(
                "probability",
                "0 <= p <= 1",
                value.to_f64().unwrap_or(f64::NAN),
            ))
        }
    }

    /// Wraps `value`, clamping sub-ulp numerical drift back into `[0, 1]`.
    ///
    /// Intended for internally computed quantities that are probabilities
    /// by construction but may land a rounding error outside the
    /// interval. NaN is a logic error, not drift, and panics.
    pub fn new_clamped(value: T) -> Self {
        assert!(!value.is_nan(), "probability is NaN");
        Probability(value.max(T::zero()).min(T::one()))
    }

    /// The underlying scalar in `[0, 1]`.
    pub fn value(self) -> T {
        self.0
    }
}

/// Poisson probability of exactly `l` photons at mean intensity `x`.
///
/// `x` is a dimensionless mean photon number, `x >= 0`. Returns a
/// probability; `pmf(0, 0) = 1` and `pmf(0, l>0) = 0`.
pub fn poisson_pmf<T: Real>(x: T, l: u32) -> Result<Probability<T>> {
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::domain(
            "mean photon number",
            "0 <= x < inf",
            x.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let e = (-x).exp();
    if l == 0 {
        return Ok(Probability::new_clamped(e));
    }
    if l <= 30 && e > T::zero() {
        // Each partial product is itself a Poisson probability, so this
        // never overflows and underflows only when the result does.
        let mut p = e;
        for i in 1..=l {
            p = p * x / T::of(f64::from(i));
        }
        return Ok(Probability::new_clamped(p));
    }
    // Log space: l ln x - x - ln l!, with the factorial summed directly.
    let mut ln_fact = T::zero();
    for i in 1..=l {
        ln_fact = ln_fact + T::of(f64::from(i)).ln();
    }
    let ln_p = T::of(f64::from(l)) * x.ln() - x - ln_fact;
    Ok(Probability::new_clamped(ln_p.exp()))
}

/// Poisson probability of `k` or more photons at mean intensity `x`.
pub fn poisson_tail<T: Real>(x: T, k: u32) -> Result<Probability<T>> {
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::domain(
            "mean photon number",
            "0 <= x < inf",
            x.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if k == 0 {
        return Ok(Probability::new_clamped(T::one()));
    }
    if x == T::zero() {
        return Ok(Probability::new_clamped(T::zero()));
    }
    if k == 1 {
        return Ok(Probability::new_clamped(-(-x).exp_m1()));
    }
    if k == 2 {
        let p = if x <= T::of(0.5) {
            // e^-x * sum_{l>=2} x^l / l!; all terms positive, no
            // cancellation for small x.
            let mut term = x * x / T::of(2.0);
            let mut sum = term;
            let mut l = 2u32;
            while term > sum * T::epsilon() && l < 60 {
                l += 1;
                term = term * x / T::of(f64::from(l));
                sum = sum + term;
            }
            (-x).exp() * sum
        } else {
            -(-x).exp_m1() - x * (-x).exp()
        };
        return Ok(Probability::new_clamped(p));
    }
    // General k: sum on the side of the mean where terms are strictly
    // decreasing, so neither path can overflow or lose the result to
    // cancellation.
    let k_f = T::of(f64::from(k));
    if k_f > x {
        // Upper sum from l = k, ratio x/(l+1) < 1 throughout.
        let mut term = poisson_pmf(x, k)?.value();
        let mut sum = term;
        let mut l = k;
        for _ in 0..100_000 {
            l += 1;
            term = term * x / T::of(f64::from(l));
            if term <= T::zero() || term < sum * T::epsilon() {
                break;
            }
            sum = sum + term;
        }
        Ok(Probability::new_clamped(sum))
    } else {
        // Complement of the lower sum, accumulated downward from
        // l = k-1 so each successive term shrinks by l/x < 1. The tail
        // itself is >= 1/2 here, so the subtraction is benign.
        let mut term = poisson_pmf(x, k - 1)?.value();
        let mut sum = term;
        for l in (1..k).rev() {
            term = term * T::of(f64::from(l)) / x;
            if term <= T::zero() {
                break;
            }
            sum = sum + term;
        }
        Ok(Probability::new_clamped(T::one() - sum))
    }
}

/// Binary entropy of `p`, in bits: `h(p) = -p log2 p - (1-p) log2 (1-p)`.
///
/// `h(0) = h(1) = 0` by continuity.
pub fn binary_entropy<T: Real>(p: Probability<T>) -> Bits<T> {
    let p = p.value();
    if p == T::zero() || p == T::one() {
        return T::zero();
    }
    let q = T::one() - p;
    -(p * p.log2() + q * q.log2())
}

/// The error function, accurate to working precision over all of `R`.
pub fn erf<T: Real>(w: T) -> T {
    let aw = w.abs();
    if aw <= T::of(5.5) {
        // (2/sqrt(pi)) w e^{-w^2} sum_n (2w^2)^n / (2n+1)!!
        // Every term is positive; the sum is ~ e^{w^2}/w in magnitude,
        // cancelled by the e^{-w^2} prefactor, so intermediates stay
        // comfortably inside range for both f32 and f64 at |w| <= 5.5.
        let t = T::of(2.0) * w * w;
        let mut term = T::one();
        let mut sum = T::one();
        let mut n = 0u32;
        while term > sum * T::epsilon() && n < 500 {
            n += 1;
            term = term * t / T::of(f64::from(2 * n + 1));
            sum = sum + term;
        }
        T::FRAC_2_SQRT_PI() * w * (-w * w).exp() * sum
    } else if aw < T::of(6.0) {
        // Asymptotic complementary expansion, truncated at its smallest
        // term: erfc(w) = e^{-w^2}/(w sqrt(pi)) sum_n (-1)^n (2n-1)!!/(2w^2)^n.
        let inv2w2 = (T::of(2.0) * aw * aw).recip();
        let mut term = T::one();
        let mut sum = T::one();
        for n in 1..60u32 {
            let next = term * T::of(f64::from(2 * n - 1)) * inv2w2;
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum = if n % 2 == 0 { sum + term } else { sum - term };
            if term.abs() < sum.abs() * T::epsilon() {
                break;
            }
        }
        let erfc = (-aw * aw).exp() / (aw * T::PI().sqrt()) * sum;
        let r = T::one() - erfc;
        if w < T::zero() {
            -r
        } else {
            r
        }
    } else if w < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// Inverse error function on the open interval `(-1, 1)`.
///
/// A rational seed (central branch for `|z| <= 0.7`, logarithmic tail
/// branch beyond) is refined with four Newton iterations against
/// [`erf`], which converges to working precision across the domain.
pub fn inverse_erf<T: Real>(z: T) -> Result<T> {
    if !(z.abs() < T::one()) {
        return Err(Error::domain(
            "inverse error function argument",
            "-1 < z < 1",
            z.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if z == T::zero() {
        return Ok(T::zero());
    }
    let az = z.abs();
    let mut x = if az <= T::of(0.7) {
        let a = [
            T::of(0.886226899),
            T::of(-1.645349621),
            T::of(0.914624893),
            T::of(-0.140543331),
        ];
        let b = [
            T::of(-2.118377725),
            T::of(1.442710462),
            T::of(-0.329097515),
            T::of(0.012229801),
        ];
        let s = z * z;
        let num = ((a[3] * s + a[2]) * s + a[1]) * s + a[0];
        let den = (((b[3] * s + b[2]) * s + b[1]) * s + b[0]) * s + T::one();
        z * num / den
    } else {
        let c = [
            T::of(-1.970840454),
            T::of(-1.624906493),
            T::of(3.429567803),
            T::of(1.641345311),
        ];
        let d = [T::of(3.543889200), T::of(1.637067800)];
        let u = (-((T::one() - az) / T::of(2.0)).ln()).sqrt();
        let num = ((c[3] * u + c[2]) * u + c[1]) * u + c[0];
        let den = (d[1] * u + d[0]) * u + T::one();
        let t = num / den;
        if z < T::zero() {
            -t
        } else {
            t
        }
    };
    // Newton polish: x <- x - (erf(x) - z) / erf'(x),
    // erf'(x) = (2/sqrt(pi)) e^{-x^2}.
    for _ in 0..4 {
        let err = erf(x) - z;
        let deriv = T::FRAC_2_SQRT_PI() * (-x * x).exp();
        x = x - err / deriv;
    }
    Ok(x)
}

/// Confidence margin added to the observed single-photon error fraction.
///
/// For `n1` single-photon sifted bits and a tolerated failure
/// probability `epsilon`, the margin is
/// `xi = inverse_erf(1 - epsilon) / sqrt(2 n1)` (dimensionless).
///
/// Errors: `n1 <= 0` and `epsilon` outside `(0, 1]` are domain errors;
/// an `epsilon` too small for `1 - epsilon` to be distinguishable from 1
/// in this scalar type makes the margin diverge.
pub fn attack_margin_xi<T: Real>(n1: T, epsilon: T) -> Result<T> {
    if !(n1 > T::zero()) || !n1.is_finite() {
        return Err(Error::domain(
            "single-photon sifted count",
            "n1 > 0",
            n1.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(Error::domain(
            "failure probability",
            "0 < epsilon <= 1",
            epsilon.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let z = T::one() - epsilon;
    if z == T::one() {
        return Err(Error::MarginDiverges {
            epsilon: epsilon.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(inverse_erf(z)? / (T::of(2.0) * n1).sqrt())
}

/// Ceiling on the collision information an interceptor gains per
/// single-photon bit, in bits, given an effective error fraction `zeta`.
///
/// For `zeta < 1/3` the ceiling is
/// `1 + log2(1 - ((1 - 3 zeta)/(1 - zeta))^2 / 2)`; beyond `zeta = 1/3`
/// an optimal measurement already extracts everything, so the ceiling
/// saturates at 1 bit. Continuous at the junction.
pub fn renyi_info_max<T: Real>(zeta: T) -> Result<Bits<T>> {
    if !(zeta >= T::zero()) {
        return Err(Error::domain(
            "effective error fraction",
            "zeta >= 0",
            zeta.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let third = T::one() / T::of(3.0);
    if zeta >= third {
        return Ok(T::one());
    }
    let u = (T::one() - T::of(3.0) * zeta) / (T::one() - zeta);
    Ok(T::one() + (T::one() - u * u / T::of(2.0)).log2())
}
