//! Secret-key budget engine for practical BB84 quantum key distribution.
//!
//! A weak-coherent-pulse BB84 link leaks information to an eavesdropper
//! through several independent doors: multi-photon pulses that can be
//! split, intercepted single photons, the public error-correction
//! transcript, and the secret bits burned authenticating the public
//! channel. This crate accounts for every door in one ledger and reports
//! the *secrecy capacity* — the fraction of raw transmitted bits that
//! survives as provably secret key — together with the secret-key rate
//! and a go/no-go feasibility verdict.
//!
//! The crate is organized around four modules:
//!
//! - [`photon_stats`]: Poisson photon-number statistics, binary entropy,
//!   the inverse error function, and the collision-entropy information
//!   ceiling — the scalar kernels everything else is built from.
//! - [`budget`]: the ledger itself. Expected sifted/error counts,
//!   error-correction leakage, the single-photon attack bound, the
//!   multi-photon attack bound in all three eavesdropping regimes, the
//!   authentication cost, and privacy-amplification compression,
//!   composed into a [`budget::BudgetLedger`].
//! - [`optimizer`]: scalar searches over the engine — best pulse
//!   intensity, maximum tolerable channel attenuation, minimum block
//!   length — plus deterministic parameter sweeps.
//! - [`mc`]: independent validation oracles. A seeded Monte Carlo pulse
//!   simulator reproduces the detection statistics empirically, and a
//!   per-photon-number series summation cross-checks every multi-photon
//!   closed form.
//!
//! All analytic code is generic over the floating-point scalar through
//! the [`Real`] trait (`f32` or `f64`); the aliases below fix the common
//! double-precision instantiations.
//!
//! # Example
//!
//! ```
//! use qkdbudget_core::budget::{self, EveClass};
//!
//! let link = budget::LinkParameters::<f64> {
//!     source: budget::SourceModel { mu: 0.1, tau: 1e-6 },
//!     channel: budget::ChannelModel::new(0.1, 0.01, budget::Medium::Fiber).unwrap(),
//!     detector: budget::DetectorModel::new(0.5, 1e-5).unwrap(),
//!     error_correction: budget::ErrorCorrectionModel { x: 1.2 },
//!     eve: budget::EveCapability { class: EveClass::TechnologyLimited, y_override: None },
//! };
//! let sec = budget::SecurityParameters::new(1e7, 0.01, 30.0, 30.0, 30.0, 30.0).unwrap();
//! let ledger = budget::compute_ledger(&link, &sec).unwrap();
//! assert!(ledger.feasible);
//! ```

pub mod budget;
pub mod error;
pub mod mc;
pub mod optimizer;
pub mod photon_stats;
pub mod scalar;

pub use error::{Error, Result};
pub use photon_stats::{Bits, Probability};
pub use scalar::Real;

/// Double-precision probability.
pub type Probability64 = Probability<f64>;
/// Double-precision link parameter bundle.
pub type LinkParameters64 = budget::LinkParameters<f64>;
/// Double-precision security parameters.
pub type SecurityParameters64 = budget::SecurityParameters<f64>;
/// Double-precision budget ledger.
pub type BudgetLedger64 = budget::BudgetLedger<f64>;
/// Double-precision attack-regime classification.
pub type AttackRegime64 = budget::AttackRegime<f64>;
/// Double-precision optimization result.
pub type OptimizationResult64 = optimizer::OptimizationResult<f64>;
/// Double-precision sweep specification.
pub type SweepSpec64 = optimizer::SweepSpec<f64>;
/// Double-precision sweep table.
pub type SweepTable64 = optimizer::SweepTable<f64>;
