//! The secret-key budget ledger.
//!
//! Every raw bit a BB84 link transmits is either spent or kept. This
//! module computes the expected ledger for a block of `m` pulses:
//!
//! ```text
//! L = n - (e_T + q + t + nu) - (a + g_pa)
//! ```
//!
//! where `n` is the expected sifted length, `e_T` the expected error
//! count (removed during reconciliation), `q` the error-correction
//! leakage, `t` the single-photon attack bound, `nu` the multi-photon
//! attack bound, `a` the authentication cost, and `g_pa` the
//! privacy-amplification compression margin. The secrecy capacity is
//! `S = L / m` (secret bits per transmitted pulse), the key rate
//! `R = S / tau` (secret bits per second), and the link is feasible
//! exactly when `S > 0`.
//!
//! The physical model: a Poissonian weak-coherent source of mean
//! intensity `mu`, a channel of transmission `alpha` that flips
//! registered bits with probability `r_c`, and a detector of quantum
//! efficiency `eta` with dark-count probability `r_d` per slot. Basis
//! reconciliation keeps half the registered pulses on average, hence
//! the recurring `m/2` prefactor.
//!
//! The interceptor's multi-photon power depends on how much of the loss
//! budget she can claw back, summarized by her per-photon delivery
//! yield `y`; [`regime_classify`] places `y` into one of three attack
//! regimes (see [`RegimeLabel`]) with different per-pulse leakage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_stats::{
    attack_margin_xi, binary_entropy, poisson_pmf, poisson_tail, renyi_info_max, Probability,
};
use crate::scalar::Real;

/// Transmission medium of the quantum channel (descriptive metadata;
/// the budget depends on it only through the supplied `alpha`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    /// Guided fiber link.
    Fiber,
    /// Free-space (line-of-sight) link.
    FreeSpace,
}

impl std::fmt::Display for Medium {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Medium::Fiber => write!(f, "fiber"),
            Medium::FreeSpace => write!(f, "free_space"),
        }
    }
}

/// Weak-coherent pulse source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel<T> {
    /// Mean photon number per pulse (dimensionless, `mu >= 0`).
    pub mu: T,
    /// Pulse period in seconds (`tau > 0`); the key rate is `S / tau`.
    pub tau: T,
}

impl<T: Real> SourceModel<T> {
    /// Validated constructor.
    pub fn new(mu: T, tau: T) -> Result<Self> {
        let s = SourceModel { mu, tau };
        s.validate()?;
        Ok(s)
    }

    /// Checks the model invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= T::zero()) || !self.mu.is_finite() {
            return Err(Error::domain(
                "source intensity mu",
                "0 <= mu < inf",
                self.mu.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::domain(
                "pulse period tau",
                "0 < tau < inf",
                self.tau.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// Quantum channel between source and detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel<T> {
    /// Transmission probability of the channel (`0 < alpha <= 1`).
    pub alpha: T,
    /// Probability that a registered channel photon lands in the wrong
    /// detector — misalignment plus imperfect visibility (`0 <= r_c <= 1`).
    pub r_c: T,
    /// Descriptive medium tag.
    pub medium: Medium,
}

impl<T: Real> ChannelModel<T> {
    /// Validated constructor.
    pub fn new(alpha: T, r_c: T, medium: Medium) -> Result<Self> {
        let c = ChannelModel { alpha, r_c, medium };
        c.validate()?;
        Ok(c)
    }

    /// Checks the model invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(Error::domain(
                "channel transmission alpha",
                "0 < alpha <= 1",
                self.alpha.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(self.r_c >= T::zero() && self.r_c <= T::one()) {
            return Err(Error::domain(
                "channel error rate r_c",
                "0 <= r_c <= 1",
                self.r_c.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// Receiver detector package.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<T> {
    /// Quantum efficiency (`0 < eta <= 1`).
    pub eta: T,
    /// Dark-count probability per detection slot (`0 <= r_d <= 1`).
    pub r_d: T,
}

impl<T: Real> DetectorModel<T> {
    /// Validated constructor.
    pub fn new(eta: T, r_d: T) -> Result<Self> {
        let d = DetectorModel { eta, r_d };
        d.validate()?;
        Ok(d)
    }

    /// Checks the model invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(Error::domain(
                "detector efficiency eta",
                "0 < eta <= 1",
                self.eta.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(self.r_d >= T::zero() && self.r_d <= T::one()) {
            return Err(Error::domain(
                "dark-count probability r_d",
                "0 <= r_d <= 1",
                self.r_d.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// Error-correction performance model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCorrectionModel<T> {
    /// Leakage multiplier over the Shannon limit (`x >= 1`): the public
    /// reconciliation transcript discloses `x * n * h(e_T / n)` bits.
    pub x: T,
}

impl<T: Real> ErrorCorrectionModel<T> {
    /// Validated constructor.
    pub fn new(x: T) -> Result<Self> {
        let e = ErrorCorrectionModel { x };
        e.validate()?;
        Ok(e)
    }

    /// Checks the model invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.x >= T::one()) || !self.x.is_finite() {
            return Err(Error::domain(
                "error-correction multiplier x",
                "1 <= x < inf",
                self.x.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// How much of the link's loss budget the interceptor can exploit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveClass {
    /// She is bound by the same hardware as the legitimate parties: her
    /// forwarded photons still suffer channel and detector losses,
    /// `y = eta * alpha`.
    TechnologyLimited,
    /// She replaces the channel with a lossless one and delivers photons
    /// straight to the receiver, beating only the detector: `y = eta`.
    LosslessReplacement,
    /// She stores entangled probes and forwards on demand; losses she
    /// cannot dodge are again only the detector's: `y = eta`.
    EntanglementAssisted,
}

impl std::fmt::Display for EveClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EveClass::TechnologyLimited => write!(f, "technology_limited"),
            EveClass::LosslessReplacement => write!(f, "lossless_replacement"),
            EveClass::EntanglementAssisted => write!(f, "entanglement_assisted"),
        }
    }
}

/// Interceptor capability assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveCapability<T> {
    /// Capability class that fixes the delivery yield `y`.
    pub class: EveClass,
    /// Explicit yield override in `[0, 1]`; wins over `class` when set.
    pub y_override: Option<T>,
}

impl<T: Real> EveCapability<T> {
    /// Checks the model invariants.
    pub fn validate(&self) -> Result<()> {
        if let Some(y) = self.y_override {
            if !(y >= T::zero() && y <= T::one()) {
                return Err(Error::domain(
                    "yield override y",
                    "0 <= y <= 1",
                    y.to_f64().unwrap_or(f64::NAN),
                ));
            }
        }
        Ok(())
    }
}

/// Complete physical description of one BB84 link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParameters<T> {
    /// Pulse source.
    pub source: SourceModel<T>,
    /// Quantum channel.
    pub channel: ChannelModel<T>,
    /// Receiver detectors.
    pub detector: DetectorModel<T>,
    /// Reconciliation performance.
    pub error_correction: ErrorCorrectionModel<T>,
    /// Interceptor assumption.
    pub eve: EveCapability<T>,
}

impl<T: Real> LinkParameters<T> {
    /// Checks every component's invariants.
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        self.error_correction.validate()?;
        self.eve.validate()
    }

    /// Mean detected photon number per pulse, `eta * mu * alpha`.
    pub fn detection_mean(&self) -> T {
        self.detector.eta * self.source.mu * self.channel.alpha
    }

    /// The interceptor's per-photon delivery yield `y` implied by her
    /// capability class (or the explicit override).
    pub fn eavesdropper_yield(&self) -> T {
        if let Some(y) = self.eve.y_override {
            return y;
        }
        match self.eve.class {
            EveClass::TechnologyLimited => self.detector.eta * self.channel.alpha,
            EveClass::LosslessReplacement | EveClass::EntanglementAssisted => self.detector.eta,
        }
    }
}

/// Security accounting parameters for one key block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParameters<T> {
    /// Block length in transmitted pulses (`m >= 2`; real-valued because
    /// the ledger works with expectations).
    pub m: T,
    /// Tolerated failure probability of the single-photon confidence
    /// margin (`0 < epsilon <= 1`).
    pub epsilon: T,
    /// Privacy-amplification compression margin in bits (`g_pa >= 0`);
    /// the interceptor's expected information after compression is
    /// `2^-g_pa / ln 2` bits.
    pub g_pa: T,
    /// Authentication security parameter in bits.
    pub g_auth: T,
    /// Security parameter for authenticating the error-correction
    /// exchange, in bits.
    pub g_ec: T,
    /// Security parameter for the secondary error-correction
    /// verification exchange, in bits.
    pub g_tilde_ec: T,
}

impl<T: Real> SecurityParameters<T> {
    /// Validated constructor. The three authentication parameters must
    /// either all be zero (authentication accounting disabled) or each
    /// be at least 2 (their logarithms appear inside the cost formula).
    pub fn new(m: T, epsilon: T, g_pa: T, g_auth: T, g_ec: T, g_tilde_ec: T) -> Result<Self> {
        let s = SecurityParameters {
            m,
            epsilon,
            g_pa,
            g_auth,
            g_ec,
            g_tilde_ec,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks the invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= T::of(2.0)) || !self.m.is_finite() {
            return Err(Error::domain(
                "block length m",
                "2 <= m < inf",
                self.m.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(self.epsilon > T::zero() && self.epsilon <= T::one()) {
            return Err(Error::domain(
                "failure probability epsilon",
                "0 < epsilon <= 1",
                self.epsilon.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(self.g_pa >= T::zero()) || !self.g_pa.is_finite() {
            return Err(Error::domain(
                "compression margin g_pa",
                "0 <= g_pa < inf",
                self.g_pa.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let trio = [
            ("authentication parameter g_auth", self.g_auth),
            ("authentication parameter g_ec", self.g_ec),
            ("authentication parameter g_tilde_ec", self.g_tilde_ec),
        ];
        if self.auth_disabled() {
            return Ok(());
        }
        for (name, g) in trio {
            if !(g >= T::of(2.0)) || !g.is_finite() {
                return Err(Error::domain(name, "g >= 2 (or all three zero)", {
                    g.to_f64().unwrap_or(f64::NAN)
                }));
            }
        }
        Ok(())
    }

    /// True when all three authentication parameters are zero, i.e. the
    /// authentication cost is accounted elsewhere and `a = 0`.
    pub fn auth_disabled(&self) -> bool {
        self.g_auth == T::zero() && self.g_ec == T::zero() && self.g_tilde_ec == T::zero()
    }
}

/// Which of the three multi-photon attack regimes applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeLabel {
    /// High yield: splitting a pulse and measuring in a random basis
    /// beats every coordinated strategy.
    Indirect,
    /// Low yield: waiting for favorable pulses and measuring both halves
    /// directly wins.
    Direct,
    /// Intermediate yield: the best strategy alternates between the two
    /// depending on the photon number.
    Adaptive,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeLabel::Indirect => write!(f, "indirect"),
            RegimeLabel::Direct => write!(f, "direct"),
            RegimeLabel::Adaptive => write!(f, "adaptive"),
        }
    }
}

/// Result of classifying an interceptor yield `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackRegime<T> {
    /// Selected regime.
    pub label: RegimeLabel,
    /// The yield that was classified.
    pub y: T,
    /// Lower boundary `1 - 2^(-1/3)`: below it the direct regime rules.
    pub y_low: T,
    /// Upper boundary `1 - 1/sqrt(2)`: above it the indirect regime rules.
    pub y_high: T,
}

/// The two regime thresholds `(y_low, y_high)`.
///
/// `y_low = 1 - 2^(-1/3) ~= 0.20630` and
/// `y_high = 1 - 1/sqrt(2) ~= 0.29289`, evaluated via `expm1` so each is
/// accurate to one ulp.
pub fn regime_thresholds<T: Real>() -> (T, T) {
    let y_low = -(-T::LN_2() / T::of(3.0)).exp_m1();
    let y_high = -(-T::LN_2() / T::of(2.0)).exp_m1();
    (y_low, y_high)
}

/// Classifies an interceptor yield into its attack regime.
///
/// `y > y_high` is indirect, `y < y_low` is direct, and the closed
/// interval `[y_low, y_high]` is adaptive.
pub fn regime_classify<T: Real>(y: T) -> Result<AttackRegime<T>> {
    if !(y >= T::zero() && y <= T::one()) {
        return Err(Error::domain(
            "interceptor yield y",
            "0 <= y <= 1",
            y.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let (y_low, y_high) = regime_thresholds::<T>();
    let label = if y > y_high {
        RegimeLabel::Indirect
    } else if y < y_low {
        RegimeLabel::Direct
    } else {
        RegimeLabel::Adaptive
    };
    Ok(AttackRegime {
        label,
        y,
        y_low,
        y_high,
    })
}

/// Relative strength of the indirect over the direct strategy for an
/// even photon number `2k` at yield `y`:
/// `sigma(k, y) = (1 - (1-y)^(2k-1)) / (1 - 2^(1-k))`.
///
/// The adaptive regime plays indirect on `2k` photons exactly when
/// `sigma >= 1`. Requires `k >= 2` (the denominator vanishes at `k = 1`)
/// and `0 <= y <= 1`.
pub fn eve_strength_sigma<T: Real>(k: u32, y: T) -> Result<T> {
    if k < 2 {
        return Err(Error::domain(
            "photon-pair index k",
            "k >= 2",
            f64::from(k),
        ));
    }
    if !(y >= T::zero() && y <= T::one()) {
        return Err(Error::domain(
            "interceptor yield y",
            "0 <= y <= 1",
            y.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let num = T::one() - (T::one() - y).powi(2 * k as i32 - 1);
    let den = T::one() - T::of(2.0).powi(1 - k as i32);
    Ok(num / den)
}

/// Expected sifted length `n` in bits for a block of `m` pulses:
/// `n = (m/2) * [psi_ge1(detection_mean) * (1 - r_d) + r_d]`.
pub fn sifted_length<T: Real>(m: T, detection_mean: T, dark_rate: T) -> Result<T> {
    let psi = poisson_tail(detection_mean, 1)?.value();
    let dark = Probability::new(dark_rate)
        .map_err(|_| {
            Error::domain(
                "dark-count probability r_d",
                "0 <= r_d <= 1",
                dark_rate.to_f64().unwrap_or(f64::NAN),
            )
        })?
        .value();
    Ok(m / T::of(2.0) * (psi * (T::one() - dark) + dark))
}

/// Expected sifted error count `e_T` in bits:
/// `e_T = (m/2) * [psi_ge1 * r_c * (1 - r_d) + r_d / 2]`.
///
/// Photon-borne bits err with probability `r_c`; bits that exist only
/// because a dark count fired are uncorrelated coin flips, hence the
/// `r_d / 2`.
pub fn error_count<T: Real>(m: T, detection_mean: T, channel_error: T, dark_rate: T) -> Result<T> {
    let psi = poisson_tail(detection_mean, 1)?.value();
    let rc = Probability::new(channel_error)
        .map_err(|_| {
            Error::domain(
                "channel error rate r_c",
                "0 <= r_c <= 1",
                channel_error.to_f64().unwrap_or(f64::NAN),
            )
        })?
        .value();
    let rd = Probability::new(dark_rate)
        .map_err(|_| {
            Error::domain(
                "dark-count probability r_d",
                "0 <= r_d <= 1",
                dark_rate.to_f64().unwrap_or(f64::NAN),
            )
        })?
        .value();
    Ok(m / T::of(2.0) * (psi * rc * (T::one() - rd) + rd / T::of(2.0)))
}

/// Expected single-photon sifted count and error count `(n1, e_T1)`:
/// the same expressions as [`sifted_length`] / [`error_count`] with the
/// full detection probability replaced by the exactly-one-photon mass
/// `psi_1(detection_mean)`.
pub fn single_photon_counts<T: Real>(
    m: T,
    detection_mean: T,
    channel_error: T,
    dark_rate: T,
) -> Result<(T, T)> {
    let psi1 = poisson_pmf(detection_mean, 1)?.value();
    let rc = Probability::new(channel_error)
        .map_err(|_| {
            Error::domain(
                "channel error rate r_c",
                "0 <= r_c <= 1",
                channel_error.to_f64().unwrap_or(f64::NAN),
            )
        })?
        .value();
    let rd = Probability::new(dark_rate)
        .map_err(|_| {
            Error::domain(
                "dark-count probability r_d",
                "0 <= r_d <= 1",
                dark_rate.to_f64().unwrap_or(f64::NAN),
            )
        })?
        .value();
    let half = m / T::of(2.0);
    let n1 = half * (psi1 * (T::one() - rd) + rd);
    let e_t1 = half * (psi1 * rc * (T::one() - rd) + rd / T::of(2.0));
    Ok((n1, e_t1))
}

/// Bits disclosed by the public error-correction transcript:
/// `q = x * n * h(e_T / n)`, zero when the block is empty.
pub fn ec_leakage<T: Real>(n: T, e_t: T, x: T) -> Result<T> {
    if !(x >= T::one()) || !x.is_finite() {
        return Err(Error::domain(
            "error-correction multiplier x",
            "1 <= x < inf",
            x.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if !(n >= T::zero()) {
        return Err(Error::domain(
            "sifted length n",
            "n >= 0",
            n.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if n == T::zero() {
        return Ok(T::zero());
    }
    if !(e_t >= T::zero() && e_t <= n) {
        return Err(Error::domain(
            "error count e_T",
            "0 <= e_T <= n",
            e_t.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(x * n * binary_entropy(Probability::new_clamped(e_t / n)))
}

/// Single-photon attack bound with its optional advisory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonBound<T> {
    /// Bits to charge against interception of single-photon pulses.
    pub bits: T,
    /// Set when the bound is vacuous because no single-photon signal
    /// exists.
    pub advisory: Option<&'static str>,
}

/// Bits an interceptor may have gained from single-photon pulses, with
/// confidence `1 - epsilon`:
///
/// ```text
/// t = (n1 - e_T1) * Ibar(e_T1/n1 + xi) + xi * n1 * sqrt(1 - e_T1/n1)
/// ```
///
/// where `xi` is the confidence margin and `Ibar` the per-bit collision
/// information ceiling. `n1 = 0` yields 0 bits with an advisory rather
/// than an error: with no single-photon signal there is nothing to
/// bound.
pub fn single_photon_attack_bound<T: Real>(
    n1: T,
    e_t1: T,
    epsilon: T,
) -> Result<SinglePhotonBound<T>> {
    if !(n1 >= T::zero()) || !n1.is_finite() {
        return Err(Error::domain(
            "single-photon sifted count n1",
            "n1 >= 0",
            n1.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if n1 == T::zero() {
        return Ok(SinglePhotonBound {
            bits: T::zero(),
            advisory: Some("no single-photon signal: the single-photon attack bound is vacuous"),
        });
    }
    if !(e_t1 >= T::zero() && e_t1 <= n1) {
        return Err(Error::domain(
            "single-photon error count e_T1",
            "0 <= e_T1 <= n1",
            e_t1.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let xi = attack_margin_xi(n1, epsilon)?;
    let ratio = e_t1 / n1;
    let ceiling = renyi_info_max(ratio + xi)?;
    let bits = (n1 - e_t1) * ceiling + xi * n1 * (T::one() - ratio).sqrt();
    Ok(SinglePhotonBound {
        bits,
        advisory: None,
    })
}

/// Poisson-weighted direct leakage of every pulse with three or more
/// photons: `sum_{j>=3} psi_j(mu) * (1 - 2^(1 - ceil(j/2)))`.
///
/// The sum telescopes to
/// `expm1(-mu) - (1 + 1/sqrt2)*expm1(-(1 - 1/sqrt2)*mu)
///             - (1 - 1/sqrt2)*expm1(-(1 + 1/sqrt2)*mu)`,
/// a grouping whose leading orders cancel exactly (the true value is
/// `mu^3/12 + O(mu^4)`), so it stays accurate to a few ulps of `mu`
/// even for intensities far below one photon per pulse.
fn three_photon_direct_sum<T: Real>(mu: T) -> T {
    let inv = T::SQRT_2().recip();
    let a = T::one() - inv;
    let b = T::one() + inv;
    (-mu).exp_m1() - b * (-(a * mu)).exp_m1() - a * (-(b * mu)).exp_m1()
}

/// Expected multi-photon leakage per pulse pair (i.e. the `nu` ledger
/// entry divided by `m/2`), for the given regime.
fn nu_per_pair<T: Real>(mu: T, regime: &AttackRegime<T>) -> Result<T> {
    let y = regime.y;
    let one = T::one();
    let two = T::of(2.0);
    match regime.label {
        RegimeLabel::Indirect => {
            // sum_{j>=2} psi_j(mu) * (1 - (1-y)^(j-1)) in closed form:
            // psi_ge2(mu) - e^-mu * (expm1(mu(1-y)) - mu(1-y)) / (1-y),
            // organized around expm1 so y -> 1 stays fully accurate.
            let psi_ge2 = poisson_tail(mu, 2)?.value();
            if y == one {
                return Ok(psi_ge2);
            }
            let d = one - y;
            let md = mu * d;
            Ok(psi_ge2 - (-mu).exp() * (md.exp_m1() - md) / d)
        }
        RegimeLabel::Direct => {
            // j = 2 leaks y; j >= 3 leaks 1 - 2^(1 - ceil(j/2)), whose
            // Poisson sum collapses into exponentials. Written with
            // expm1 so the O(mu^3) total survives mu -> 0, where the
            // textbook 1 - e^-mu*(sqrt2 sinh + 2 cosh - 1) grouping
            // cancels to roundoff.
            let psi2 = poisson_pmf(mu, 2)?.value();
            let tail = three_photon_direct_sum(mu);
            Ok(psi2 * y + tail)
        }
        RegimeLabel::Adaptive => {
            // Odd photon numbers always favor the direct play; their
            // Poisson sum e^-mu*(sinh mu - sqrt2 sinh(mu/sqrt2)) is
            // likewise organized around expm1 (it is O(mu^3) too).
            // Even numbers 2k pick whichever strategy is stronger at
            // this yield.
            let psi2 = poisson_pmf(mu, 2)?.value();
            let inv = T::SQRT_2().recip();
            let a = one - inv;
            let b = one + inv;
            let odd = -(-(mu + mu)).exp_m1() / two
                - ((-(a * mu)).exp_m1() - (-(b * mu)).exp_m1()) * inv;
            let mut total = psi2 * y + odd;
            let tol = T::of(1e-15);
            for k in 2..=200u32 {
                // The remaining even-photon mass bounds the truncation
                // error, so stop once it is negligible.
                if poisson_tail(mu, 2 * k)?.value() < tol {
                    break;
                }
                let psi_2k = poisson_pmf(mu, 2 * k)?.value();
                let bits = if eve_strength_sigma(k, y)? >= one {
                    one - (one - y).powi(2 * k as i32 - 1)
                } else {
                    one - two.powi(1 - k as i32)
                };
                total = total + psi_2k * bits;
            }
            Ok(total)
        }
    }
}

/// Expected bits forfeited to multi-photon attacks over a block of `m`
/// pulses: `nu = (m/2) * sum_{j>=2} psi_j(mu) * leak(j)`, with `leak`
/// given by the regime's optimal strategy.
pub fn multiphoton_leakage<T: Real>(m: T, mu: T, regime: &AttackRegime<T>) -> Result<T> {
    if !(m >= T::zero()) || !m.is_finite() {
        return Err(Error::domain(
            "block length m",
            "m >= 0",
            m.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(m / T::of(2.0) * nu_per_pair(mu, regime)?)
}

/// Secret bits consumed authenticating the public discussion of one
/// block: tag exchanges for sifting and reconciliation, each costing
/// `4 * (g + log2 log2 W) * log2 W` bits for a message of width `W`
/// plus the verification parameters themselves.
///
/// Requires `n >= 2`, `m >= 2`, and each security parameter `>= 2`;
/// anything smaller would push an inner logarithm out of its domain.
pub fn auth_cost<T: Real>(n: T, m: T, g_auth: T, g_ec: T, g_tilde_ec: T) -> Result<T> {
    let two = T::of(2.0);
    for (name, v) in [
        ("sifted length n", n),
        ("block length m", m),
        ("authentication parameter g_auth", g_auth),
        ("authentication parameter g_ec", g_ec),
        ("authentication parameter g_tilde_ec", g_tilde_ec),
    ] {
        if !(v >= two) || !v.is_finite() {
            return Err(Error::domain(
                name,
                "v >= 2 (inner log2 must stay positive)",
                v.to_f64().unwrap_or(f64::NAN),
            ));
        }
    }
    let four = T::of(4.0);
    let w1 = (two * n * (T::one() + m.log2())).log2();
    let w2 = (two * n).log2();
    let w3 = n.log2();
    let w4 = g_ec.log2();
    let w6 = g_tilde_ec.log2();
    Ok(four * (g_auth + w1.log2()) * w1
        + four * (g_auth + w2.log2()) * w2
        + four * (g_ec + w3.log2()) * w3
        + four * (g_auth + w4.log2()) * w4
        + g_tilde_ec
        + four * (g_auth + w6.log2()) * w6)
}

/// Expected information (bits) the interceptor keeps on the final key
/// after compressing by a margin of `g_pa` bits: `2^-g_pa / ln 2`.
pub fn pa_info_bound<T: Real>(g_pa: T) -> Result<T> {
    if !(g_pa >= T::zero()) || !g_pa.is_finite() {
        return Err(Error::domain(
            "compression margin g_pa",
            "0 <= g_pa < inf",
            g_pa.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok((-g_pa * T::LN_2()).exp() / T::LN_2())
}

/// The complete expected budget for one block.
///
/// All counts are expected values in bits; `capacity` is bits per
/// transmitted pulse and `rate` bits per second. Serialized field names
/// use the conventional short symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger<T> {
    /// Block length in pulses.
    #[serde(rename = "m")]
    pub block_length: T,
    /// Expected sifted bits.
    #[serde(rename = "n")]
    pub sifted: T,
    /// Expected sifted errors.
    #[serde(rename = "e_T")]
    pub sifted_errors: T,
    /// Expected single-photon sifted bits.
    #[serde(rename = "n1")]
    pub single_photon_sifted: T,
    /// Expected single-photon errors.
    #[serde(rename = "e_T1")]
    pub single_photon_errors: T,
    /// Error-correction leakage.
    #[serde(rename = "q")]
    pub ec_leakage: T,
    /// Single-photon attack bound.
    #[serde(rename = "t")]
    pub single_photon_attack: T,
    /// Multi-photon attack bound.
    #[serde(rename = "nu")]
    pub multiphoton_leakage: T,
    /// Authentication cost.
    #[serde(rename = "a")]
    pub auth_cost: T,
    /// Privacy-amplification compression margin.
    #[serde(rename = "g_pa")]
    pub pa_compression: T,
    /// Distillable secret bits: `n - (e_T + q + t + nu) - (a + g_pa)`.
    #[serde(rename = "L")]
    pub key_length: T,
    /// Secrecy capacity `L / m` in bits per pulse.
    #[serde(rename = "S")]
    pub capacity: T,
    /// Secret-key rate `S / tau` in bits per second.
    #[serde(rename = "R")]
    pub rate: T,
    /// Small-dark-rate closed-form approximation to the capacity.
    #[serde(rename = "S_approx")]
    pub capacity_small_dark: T,
    /// Error-cost multiplier `f = 1 + q/e_T + t/e_T` (1 when `e_T = 0`).
    #[serde(rename = "f")]
    pub error_multiplier: T,
    /// Multi-photon leakage per pulse pair, `nu / (m/2)`.
    #[serde(rename = "nu_tilde")]
    pub multiphoton_rescaled: T,
    /// Interceptor yield used for the multi-photon bound.
    #[serde(rename = "y")]
    pub eavesdropper_yield: T,
    /// Attack regime selected by that yield.
    pub regime: RegimeLabel,
    /// True exactly when `S > 0`.
    pub feasible: bool,
    /// Human-readable cautions accumulated while computing the ledger.
    pub warnings: Vec<String>,
}

/// Computes the full expected budget ledger for one block.
///
/// Domain violations in the inputs are errors; an unprofitable link is
/// not. When `L <= 0` the ledger is returned with `feasible = false` so
/// callers can inspect where the budget went.
pub fn compute_ledger<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
) -> Result<BudgetLedger<T>> {
    link.validate()?;
    sec.validate()?;
    let mut warnings = Vec::new();

    let m = sec.m;
    let x_mean = link.detection_mean();
    let r_c = link.channel.r_c;
    let r_d = link.detector.r_d;
    let ec_x = link.error_correction.x;

    let n = sifted_length(m, x_mean, r_d)?;
    let e_t = error_count(m, x_mean, r_c, r_d)?;
    let (n1, e_t1) = single_photon_counts(m, x_mean, r_c, r_d)?;
    let q = ec_leakage(n, e_t, ec_x)?;

    if n > T::zero() && e_t / n > T::of(0.25) {
        warnings.push(format!(
            "sifted error rate {} exceeds 0.25; reconciliation leakage is near total",
            e_t / n
        ));
    }

    let bound = single_photon_attack_bound(n1, e_t1, sec.epsilon)?;
    if let Some(advisory) = bound.advisory {
        warnings.push(advisory.to_string());
    }
    let t = bound.bits;

    let y = link.eavesdropper_yield();
    let regime = regime_classify(y)?;
    let nu = multiphoton_leakage(m, link.source.mu, &regime)?;

    let a = if sec.auth_disabled() {
        T::zero()
    } else {
        match auth_cost(n, m, sec.g_auth, sec.g_ec, sec.g_tilde_ec) {
            Ok(a) => a,
            // Too little sifted signal to even authenticate the
            // discussion: the block is unusable, not ill-posed.
            Err(_) if n < T::of(2.0) => {
                warnings.push(format!(
                    "sifted length {n} is too small to authenticate; treating the block as unusable"
                ));
                T::infinity()
            }
            Err(e) => return Err(e),
        }
    };

    let key_length = n - (e_t + q + t + nu) - (a + sec.g_pa);
    let capacity = key_length / m;
    let rate = capacity / link.source.tau;

    // Diagnostic closed form: rescale everything per pulse and fold the
    // error-linked costs into a single multiplier f = 1 + q/e_T + t/e_T.
    let f = if e_t > T::zero() {
        T::one() + q / e_t + t / e_t
    } else {
        T::one()
    };
    let half_m = m / T::of(2.0);
    let nu_tilde = nu / half_m;
    let psi_ge1 = poisson_tail(x_mean, 1)?.value();
    let capacity_small_dark = (psi_ge1 * (T::one() - f * r_c)
        + (T::one() - f / T::of(2.0)) * r_d
        - nu_tilde)
        / T::of(2.0)
        - (sec.g_pa + a) / m;

    Ok(BudgetLedger {
        block_length: m,
        sifted: n,
        sifted_errors: e_t,
        single_photon_sifted: n1,
        single_photon_errors: e_t1,
        ec_leakage: q,
        single_photon_attack: t,
        multiphoton_leakage: nu,
        auth_cost: a,
        pa_compression: sec.g_pa,
        key_length,
        capacity,
        rate,
        capacity_small_dark,
        error_multiplier: f,
        multiphoton_rescaled: nu_tilde,
        eavesdropper_yield: y,
        regime: regime.label,
        feasible: capacity > T::zero(),
        warnings,
    })
}

/// Secrecy capacity in the infinite-block limit, in bits per pulse.
///
/// Per-block costs (`a`, `g_pa`) amortize to nothing and the confidence
/// margin `xi` vanishes, leaving
/// `S_inf = [n - e_T - q - (n1 - e_T1) * Ibar(e_T1/n1) - nu] / m`,
/// which is independent of `m`. A link with `S_inf <= 0` cannot be
/// rescued by any block length.
pub fn asymptotic_capacity<T: Real>(link: &LinkParameters<T>) -> Result<T> {
    link.validate()?;
    let m = T::of(2.0);
    let x_mean = link.detection_mean();
    let r_c = link.channel.r_c;
    let r_d = link.detector.r_d;

    let n = sifted_length(m, x_mean, r_d)?;
    let e_t = error_count(m, x_mean, r_c, r_d)?;
    let (n1, e_t1) = single_photon_counts(m, x_mean, r_c, r_d)?;
    let q = ec_leakage(n, e_t, link.error_correction.x)?;
    let t_inf = if n1 > T::zero() {
        (n1 - e_t1) * renyi_info_max(e_t1 / n1)?
    } else {
        T::zero()
    };
    let regime = regime_classify(link.eavesdropper_yield())?;
    let nu = multiphoton_leakage(m, link.source.mu, &regime)?;
    Ok((n - e_t - q - t_inf - nu) / m)
}
