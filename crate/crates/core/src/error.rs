//! Error type shared by the whole engine.
//!
//! Domain violations are reported with the offending quantity's name,
//! the constraint it broke, and the value seen, so a CLI can print an
//! actionable message without pattern-matching on formatted strings.

use thiserror::Error;

/// Engine result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while computing a budget.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input or intermediate quantity violated its mathematical domain.
    #[error("domain error: {name} must satisfy {constraint}, got {value}")]
    Domain {
        /// Human-readable name of the offending quantity.
        name: &'static str,
        /// The constraint that was violated, e.g. `"0 < eta <= 1"`.
        constraint: &'static str,
        /// The value actually seen (widened to `f64` for reporting).
        value: f64,
    },

    /// The confidence margin diverges: `1 - epsilon` rounds to 1, so the
    /// inverse error function has no finite argument to work with.
    #[error("confidence margin diverges: epsilon = {epsilon:e} is too small to represent 1 - epsilon < 1")]
    MarginDiverges {
        /// The requested failure probability.
        epsilon: f64,
    },

    /// A Monte Carlo block length exceeded the simulator's hard cap.
    #[error("block too large for simulation: requested {requested} pulses, limit {limit}")]
    BlockTooLarge {
        /// Pulses requested.
        requested: u64,
        /// Simulator cap.
        limit: u64,
    },

    /// A Poisson mean exceeded the simulator's sampling range.
    #[error("photon-number mean too large for simulation: {mean}, limit {limit}")]
    MeanTooLarge {
        /// Mean requested.
        mean: f64,
        /// Simulator cap.
        limit: f64,
    },

    /// A sweep axis name did not match any sweepable parameter.
    #[error(
        "unknown sweep axis '{given}'; expected one of source.mu, source.tau, channel.alpha, \
         channel.r_c, detector.eta, detector.r_d, error_correction.x, eve.y_override, \
         security.m, security.epsilon, security.g_pa, security.g_auth, security.g_ec, \
         security.g_tilde_ec"
    )]
    UnknownAxis {
        /// The name that failed to parse.
        given: String,
    },
}

impl Error {
    /// Convenience constructor for [`Error::Domain`].
    pub fn domain(name: &'static str, constraint: &'static str, value: f64) -> Self {
        Error::Domain {
            name,
            constraint,
            value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_message_names_the_quantity() {
        let e = Error::domain("eta", "0 < eta <= 1", 1.5);
        let msg = e.to_string();
        assert!(msg.contains("eta"));
        assert!(msg.contains("0 < eta <= 1"));
        assert!(msg.contains("1.5"));
    }

    #[test]
    fn margin_message_contains_epsilon() {
        let e = Error::MarginDiverges { epsilon: 1e-20 };
        assert!(e.to_string().contains("1e-20"));
    }
}
