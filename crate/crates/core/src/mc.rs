//! Independent validation oracles for the closed-form budget.
//!
//! Two deliberately different computation routes live here:
//!
//! - [`simulate_block`] plays out a block pulse by pulse with a seeded
//!   counter-based generator, tallying sifted bits, errors, and their
//!   single-photon-class subsets. The tallies are binomial samples whose
//!   expectations are exactly the closed-form ledger entries, so the
//!   engine can be checked statistically with no shared code path.
//! - [`nu_series`] re-derives the multi-photon leakage by brute-force
//!   summation over photon numbers using [`per_pulse_info`], one term
//!   per `j`, instead of the collapsed closed forms in
//!   [`crate::budget`].
//!
//! Determinism: a block is split into fixed-size shards of
//! [`SHARD_PULSES`] pulses. Shard `s` draws from stream `s` of a
//! ChaCha8 generator seeded with the block seed, and the per-shard
//! tallies are reduced in shard order. The result therefore depends
//! only on `(seed, m, parameters)` — never on how many threads happened
//! to run the shards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::budget::{eve_strength_sigma, AttackRegime, LinkParameters, RegimeLabel};
use crate::error::{Error, Result};
use crate::photon_stats::{poisson_pmf, poisson_tail};
use crate::scalar::Real;

/// Name of the pseudo-random generator backing the simulator.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Pulses per deterministic shard. Fixed so that tallies are identical
/// for every thread count.
pub const SHARD_PULSES: u64 = 1 << 16;

/// Hard cap on simulated block length.
pub const MAX_PULSES: u64 = 100_000_000;

/// Hard cap on the detected mean photon number the sampler accepts.
pub const MAX_MEAN: f64 = 50.0;

/// Tallies from one simulated block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulationOutcome {
    /// Pulses simulated.
    pub pulses: u64,
    /// Sifted bits (closed-form expectation: `n`).
    pub sifted: u64,
    /// Sifted errors (expectation: `e_T`).
    pub errors: u64,
    /// Sifted bits in the single-photon class (expectation: `n1`).
    pub sifted_single_photon: u64,
    /// Errors in the single-photon class (expectation: `e_T1`).
    pub errors_single_photon: u64,
    /// Seed the block was drawn from.
    pub seed: u64,
    /// Generator identifier, for the record.
    pub rng: &'static str,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    sifted: u64,
    errors: u64,
    sifted_single: u64,
    errors_single: u64,
}

/// Draws a Poisson sample by CDF inversion. Exact for any mean in
/// `[0, MAX_MEAN]`; `mean = 0` consumes the uniform and returns 0.
fn poisson_draw(u: f64, mean: f64) -> u32 {
    let mut p = (-mean).exp();
    let mut cum = p;
    let mut k = 0u32;
    while u >= cum && k < 1000 {
        k += 1;
        p *= mean / f64::from(k);
        cum += p;
    }
    k
}

fn simulate_shard(cfg: &ShardConfig, shard: u64, pulses: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shard);
    let mut t = Tally::default();
    for _ in 0..pulses {
        // Photons surviving source, channel, and detector thinning.
        let k = poisson_draw(rng.gen::<f64>(), cfg.detection_mean);
        let dark = rng.gen::<f64>() < cfg.r_d;
        if k == 0 && !dark {
            continue;
        }
        // Basis reconciliation keeps half the registered pulses.
        if rng.gen::<f64>() >= 0.5 {
            continue;
        }
        t.sifted += 1;
        // A bit registered by a real photon errs with the channel error
        // probability even if a dark count fired alongside it (the
        // photon's click dominates); a bit that exists only because of
        // a dark count is a fair coin. The closed forms split the
        // photon+dark overlap evenly instead, a per-pulse difference of
        // r_d * psi_ge1 * (r_c - 1/2) — orders of magnitude below the
        // statistical resolution of any feasible block.
        let err_p = if k >= 1 { cfg.r_c } else { 0.5 };
        let err = rng.gen::<f64>() < err_p;
        if err {
            t.errors += 1;
        }
        // Single-photon class: exactly one real photon, or any
        // dark-triggered registration.
        if k == 1 || dark {
            t.sifted_single += 1;
            if err {
                t.errors_single += 1;
            }
        }
    }
    t
}

struct ShardConfig {
    seed: u64,
    detection_mean: f64,
    r_c: f64,
    r_d: f64,
}

/// Simulates a block of `m` pulses and returns the raw tallies.
///
/// `m` must not exceed [`MAX_PULSES`] and the detected mean photon
/// number must not exceed [`MAX_MEAN`]. Shards run in parallel on the
/// global thread pool; the outcome is identical for any thread count.
pub fn simulate_block(m: u64, link: &LinkParameters<f64>, seed: u64) -> Result<SimulationOutcome> {
    link.validate()?;
    if m > MAX_PULSES {
        return Err(Error::BlockTooLarge {
            requested: m,
            limit: MAX_PULSES,
        });
    }
    let mean = link.detection_mean();
    if mean > MAX_MEAN {
        return Err(Error::MeanTooLarge {
            mean,
            limit: MAX_MEAN,
        });
    }
    let cfg = ShardConfig {
        seed,
        detection_mean: mean,
        r_c: link.channel.r_c,
        r_d: link.detector.r_d,
    };
    let shards = m / SHARD_PULSES;
    let remainder = m % SHARD_PULSES;
    let total_shards = shards + u64::from(remainder > 0);
    let tallies: Vec<Tally> = (0..total_shards)
        .into_par_iter()
        .map(|s| {
            let pulses = if s < shards { SHARD_PULSES } else { remainder };
            simulate_shard(&cfg, s, pulses)
        })
        .collect();
    let mut total = Tally::default();
    for t in tallies {
        total.sifted += t.sifted;
        total.errors += t.errors;
        total.sifted_single += t.sifted_single;
        total.errors_single += t.errors_single;
    }
    Ok(SimulationOutcome {
        pulses: m,
        sifted: total.sifted,
        errors: total.errors,
        sifted_single_photon: total.sifted_single,
        errors_single_photon: total.errors_single,
        seed,
        rng: RNG_ALGORITHM,
    })
}

/// Which of the two base strategies the interceptor plays on a given
/// photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Split the pulse, store a probe, measure after basis revelation.
    Indirect,
    /// Measure both halves immediately in fixed bases.
    Direct,
}

/// Per-photon-number attack profile: what a `j`-photon pulse leaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerPulseInfo<T> {
    /// Photon number (`j >= 2`).
    pub j: u32,
    /// Strategy the regime assigns to this photon number.
    pub strategy: Strategy,
    /// Expected bits leaked per sifted bit from such a pulse.
    pub bits: T,
}

/// Expected leakage of a `j`-photon pulse under the given regime.
///
/// Indirect regime: `1 - (1-y)^(j-1)` for every `j`. Direct regime:
/// `y` for `j = 2`, `1 - 2^(1 - ceil(j/2))` beyond. Adaptive regime:
/// odd photon numbers always play direct; even numbers `2k` play
/// whichever strategy [`eve_strength_sigma`] favors at this yield.
pub fn per_pulse_info<T: Real>(j: u32, regime: &AttackRegime<T>) -> Result<PerPulseInfo<T>> {
    if j < 2 {
        return Err(Error::domain("photon number j", "j >= 2", f64::from(j)));
    }
    let y = regime.y;
    let one = T::one();
    let two = T::of(2.0);
    let indirect_bits = |j: u32| one - (one - y).powi(j as i32 - 1);
    let direct_bits = |j: u32| {
        if j == 2 {
            y
        } else {
            // ceil(j/2) probes of which all but the basis-lucky half
            // read out cleanly.
            one - two.powi(1 - ((j + 1) / 2) as i32)
        }
    };
    let (strategy, bits) = match regime.label {
        RegimeLabel::Indirect => (Strategy::Indirect, indirect_bits(j)),
        RegimeLabel::Direct => (Strategy::Direct, direct_bits(j)),
        RegimeLabel::Adaptive => {
            if j % 2 == 1 || j == 2 {
                (Strategy::Direct, direct_bits(j))
            } else if eve_strength_sigma(j / 2, y)? >= one {
                (Strategy::Indirect, indirect_bits(j))
            } else {
                (Strategy::Direct, direct_bits(j))
            }
        }
    };
    Ok(PerPulseInfo { j, strategy, bits })
}

/// Multi-photon leakage per pulse pair by direct series summation:
/// `sum_{j>=2} psi_j(mu) * leak(j)`, truncated once the remaining
/// photon-number mass `psi_ge_j(mu)` (an upper bound on the remaining
/// sum, since every `leak(j) <= 1`) drops below `tol`.
///
/// This is the independent cross-check for the closed forms in
/// [`crate::budget::multiphoton_leakage`]; it shares no algebra with
/// them beyond the Poisson mass function itself.
pub fn nu_series<T: Real>(mu: T, regime: &AttackRegime<T>, tol: T) -> Result<T> {
    if !(mu >= T::zero()) || !mu.is_finite() {
        return Err(Error::domain(
            "source intensity mu",
            "0 <= mu < inf",
            mu.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if !(tol > T::zero()) {
        return Err(Error::domain(
            "series tolerance",
            "tol > 0",
            tol.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let mut sum = T::zero();
    for j in 2..10_000u32 {
        if poisson_tail(mu, j)?.value() < tol {
            break;
        }
        let info = per_pulse_info(j, regime)?;
        sum = sum + poisson_pmf(mu, j)?.value() * info.bits;
    }
    Ok(sum)
}
