//! Scalar searches and parameter sweeps over the budget engine.
//!
//! Three questions come up constantly when sizing a link:
//!
//! - [`optimize_mu`]: which pulse intensity maximizes the secrecy
//!   capacity? (Too dim and nothing arrives; too bright and the
//!   multi-photon bleed eats the key.)
//! - [`max_attenuation`]: how lossy may the channel get before the
//!   budget goes under?
//! - [`min_block_length`]: how many pulses must a block contain before
//!   the fixed per-block costs amortize into a positive budget?
//!
//! All three report through [`OptimizationResult`], including the
//! ledger at the optimum and a `boundary` flag that is raised whenever
//! the answer is pinned against an edge of the search interval (a hint
//! to widen it). [`sweep`] evaluates the ledger along a caller-chosen
//! parameter axis, optionally re-optimizing the intensity at every
//! point, and runs the grid in parallel.

use rayon::prelude::*;
use serde::Serialize;

use crate::budget::{compute_ledger, asymptotic_capacity, BudgetLedger, LinkParameters, SecurityParameters};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Points in the coarse scan that precedes golden-section refinement.
const MU_GRID_POINTS: usize = 96;

/// Relative convergence tolerance on the optimal intensity.
const MU_RELATIVE_TOL: f64 = 1e-6;

/// Absolute convergence tolerance on the attenuation threshold.
const ALPHA_ABSOLUTE_TOL: f64 = 1e-9;

/// Points in the feasibility scan used when the interceptor yield is
/// coupled to the channel transmission.
const ALPHA_GRID_POINTS: usize = 64;

/// Search floor for the attenuation threshold.
const ALPHA_FLOOR: f64 = 1e-12;

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INVPHI: f64 = 0.618_033_988_749_894_9;

/// Outcome of a scalar optimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult<T> {
    /// Optimizing parameter value.
    pub argmax: T,
    /// Objective (secrecy capacity `S`) at `argmax`.
    pub value: T,
    /// Whether the link is feasible at `argmax` (`S > 0`).
    pub feasible: bool,
    /// True when `argmax` is pinned against an edge of the search
    /// interval, i.e. the reported optimum may improve with wider bounds.
    pub boundary: bool,
    /// Number of ledger evaluations spent.
    pub iterations: u32,
    /// Full budget at the optimum (absent when no ledger was computable,
    /// e.g. an asymptotically infeasible link).
    pub ledger_at_optimum: Option<BudgetLedger<T>>,
}

fn ledger_with_mu<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
    mu: T,
) -> Result<BudgetLedger<T>> {
    let mut l = *link;
    l.source.mu = mu;
    compute_ledger(&l, sec)
}

fn ledger_with_alpha<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
    alpha: T,
) -> Result<BudgetLedger<T>> {
    let mut l = *link;
    l.channel.alpha = alpha;
    compute_ledger(&l, sec)
}

fn ledger_with_m<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
    m: T,
) -> Result<BudgetLedger<T>> {
    let mut s = *sec;
    s.m = m;
    compute_ledger(link, &s)
}

/// Finds the pulse intensity in `[mu_lo, mu_hi]` that maximizes the
/// secrecy capacity.
///
/// A 96-point logarithmic scan locates every local maximum; each is
/// refined by golden-section search to a relative tolerance of `1e-6`
/// and the best survivor wins. The capacity is smooth but can develop
/// shoulders where the attack regime switches, which is why all local
/// maxima are refined rather than just the best scan point.
pub fn optimize_mu<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
    mu_lo: T,
    mu_hi: T,
) -> Result<OptimizationResult<T>> {
    if !(mu_lo > T::zero() && mu_lo < mu_hi) || !mu_hi.is_finite() {
        return Err(Error::domain(
            "intensity bounds",
            "0 < mu_lo < mu_hi < inf",
            mu_lo.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let mut evals: u32 = 0;
    let u_lo = mu_lo.ln();
    let u_hi = mu_hi.ln();
    let step = (u_hi - u_lo) / T::of((MU_GRID_POINTS - 1) as f64);

    let mut grid_s = Vec::with_capacity(MU_GRID_POINTS);
    let mut grid_u = Vec::with_capacity(MU_GRID_POINTS);
    for i in 0..MU_GRID_POINTS {
        let u = u_lo + step * T::of(i as f64);
        let ledger = ledger_with_mu(link, sec, u.exp())?;
        evals += 1;
        grid_u.push(u);
        grid_s.push(ledger.capacity);
    }

    // Local maxima of the scan, endpoints included.
    let mut candidates = Vec::new();
    for i in 0..MU_GRID_POINTS {
        let left_ok = i == 0 || grid_s[i] >= grid_s[i - 1];
        let right_ok = i == MU_GRID_POINTS - 1 || grid_s[i] >= grid_s[i + 1];
        if left_ok && right_ok {
            candidates.push(i);
        }
    }

    let tol = T::of(MU_RELATIVE_TOL);
    let invphi = T::of(INVPHI);
    let mut best: Option<(T, BudgetLedger<T>)> = None;
    let consider = |mu: T, ledger: BudgetLedger<T>, best: &mut Option<(T, BudgetLedger<T>)>| {
        let replace = match best {
            Some((_, b)) => ledger.capacity > b.capacity,
            None => true,
        };
        if replace {
            *best = Some((mu, ledger));
        }
    };

    for &i in &candidates {
        // Golden-section in log space: the bracket width is directly the
        // relative tolerance on mu.
        let mut a = grid_u[i.saturating_sub(1)];
        let mut b = grid_u[(i + 1).min(MU_GRID_POINTS - 1)];
        let mut c = b - invphi * (b - a);
        let mut d = a + invphi * (b - a);
        let mut lc = ledger_with_mu(link, sec, c.exp())?;
        let mut ld = ledger_with_mu(link, sec, d.exp())?;
        evals += 2;
        while b - a > tol {
            if lc.capacity >= ld.capacity {
                b = d;
                d = c;
                ld = lc;
                c = b - invphi * (b - a);
                lc = ledger_with_mu(link, sec, c.exp())?;
            } else {
                a = c;
                c = d;
                lc = ld;
                d = a + invphi * (b - a);
                ld = ledger_with_mu(link, sec, d.exp())?;
            }
            evals += 1;
        }
        if lc.capacity >= ld.capacity {
            consider(c.exp(), lc, &mut best);
        } else {
            consider(d.exp(), ld, &mut best);
        }
    }

    let (argmax, ledger) = best.expect("scan produced at least one candidate");
    let rel_tol = T::of(MU_RELATIVE_TOL);
    let boundary = (argmax - mu_lo).abs() <= mu_lo * rel_tol * T::of(4.0)
        || (mu_hi - argmax).abs() <= mu_hi * rel_tol * T::of(4.0);
    Ok(OptimizationResult {
        argmax,
        value: ledger.capacity,
        feasible: ledger.capacity > T::zero(),
        boundary,
        iterations: evals,
        ledger_at_optimum: Some(ledger),
    })
}

/// Finds the smallest channel transmission `alpha` in `(0, 1]` that
/// still yields a positive budget — i.e. the maximum tolerable
/// attenuation — at the configured intensity.
///
/// When the interceptor yield does not depend on `alpha`, the capacity
/// is monotone in `alpha` and a pure bisection (absolute tolerance
/// `1e-9`) suffices. With a technology-limited interceptor the yield
/// `y = eta * alpha` moves through the attack regimes as `alpha`
/// shrinks, so a logarithmic feasibility scan brackets the lowest
/// feasible point first and the bisection polishes that bracket. The
/// returned `argmax` is the feasible end of the final bracket.
pub fn max_attenuation<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
) -> Result<OptimizationResult<T>> {
    let mut evals: u32 = 0;
    let floor = T::of(ALPHA_FLOOR);
    let one = T::one();

    let top = ledger_with_alpha(link, sec, one)?;
    evals += 1;
    if !top.feasible {
        return Ok(OptimizationResult {
            argmax: one,
            value: top.capacity,
            feasible: false,
            boundary: true,
            iterations: evals,
            ledger_at_optimum: Some(top),
        });
    }

    let yield_tracks_alpha =
        link.eve.y_override.is_none() && link.eve.class == crate::budget::EveClass::TechnologyLimited;

    // Bracket [lo, hi] with lo infeasible and hi feasible.
    let (mut lo, mut hi) = if yield_tracks_alpha {
        // Scan downward for the lowest feasible grid point.
        let u_lo = floor.ln();
        let u_hi = one.ln();
        let step = (u_hi - u_lo) / T::of((ALPHA_GRID_POINTS - 1) as f64);
        let mut lowest_feasible = one;
        let mut first_infeasible = None;
        for i in (0..ALPHA_GRID_POINTS - 1).rev() {
            let alpha = (u_lo + step * T::of(i as f64)).exp();
            let ledger = ledger_with_alpha(link, sec, alpha)?;
            evals += 1;
            if ledger.feasible {
                lowest_feasible = alpha;
            } else {
                first_infeasible = Some(alpha);
                break;
            }
        }
        match first_infeasible {
            Some(bad) => (bad, lowest_feasible),
            None => {
                // Feasible all the way down to the scan floor.
                let ledger = ledger_with_alpha(link, sec, floor)?;
                evals += 1;
                if ledger.feasible {
                    return Ok(OptimizationResult {
                        argmax: floor,
                        value: ledger.capacity,
                        feasible: true,
                        boundary: true,
                        iterations: evals,
                        ledger_at_optimum: Some(ledger),
                    });
                }
                (floor, lowest_feasible)
            }
        }
    } else {
        let bottom = ledger_with_alpha(link, sec, floor)?;
        evals += 1;
        if bottom.feasible {
            return Ok(OptimizationResult {
                argmax: floor,
                value: bottom.capacity,
                feasible: true,
                boundary: true,
                iterations: evals,
                ledger_at_optimum: Some(bottom),
            });
        }
        (floor, one)
    };

    let tol = T::of(ALPHA_ABSOLUTE_TOL);
    while hi - lo > tol {
        let mid = (lo + hi) / T::of(2.0);
        let ledger = ledger_with_alpha(link, sec, mid)?;
        evals += 1;
        if ledger.feasible {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let ledger = ledger_with_alpha(link, sec, hi)?;
    evals += 1;
    Ok(OptimizationResult {
        argmax: hi,
        value: ledger.capacity,
        feasible: ledger.feasible,
        boundary: false,
        iterations: evals,
        ledger_at_optimum: Some(ledger),
    })
}

/// Finds the smallest block length `m` (an integer) with a positive
/// budget.
///
/// The infinite-block capacity gates the search: if even `m -> inf`
/// cannot pay the per-pulse costs, no finite block can, and the result
/// reports infeasibility without searching. Otherwise the block length
/// doubles from 64 until feasible, and an integer bisection pins the
/// smallest feasible value (ties round up: the returned `m` is always
/// feasible).
pub fn min_block_length<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
) -> Result<OptimizationResult<T>> {
    let s_inf = asymptotic_capacity(link)?;
    let mut evals: u32 = 1;
    if s_inf <= T::zero() {
        return Ok(OptimizationResult {
            argmax: T::infinity(),
            value: s_inf,
            feasible: false,
            boundary: false,
            iterations: evals,
            ledger_at_optimum: None,
        });
    }

    // Exponential climb until feasible. 2^53 keeps m exactly
    // representable; past it the per-block costs are long gone anyway.
    let mut hi: u64 = 64;
    loop {
        let ledger = ledger_with_m(link, sec, T::of(hi as f64))?;
        evals += 1;
        if ledger.feasible {
            break;
        }
        if hi >= 1 << 53 {
            return Ok(OptimizationResult {
                argmax: T::of(hi as f64),
                value: ledger.capacity,
                feasible: false,
                boundary: true,
                iterations: evals,
                ledger_at_optimum: Some(ledger),
            });
        }
        hi *= 2;
    }

    let mut lo: u64 = if hi == 64 { 2 } else { hi / 2 };
    if lo == 2 {
        let ledger = ledger_with_m(link, sec, T::of(2.0))?;
        evals += 1;
        if ledger.feasible {
            // Even the smallest legal block is feasible.
            return Ok(OptimizationResult {
                argmax: T::of(2.0),
                value: ledger.capacity,
                feasible: true,
                boundary: true,
                iterations: evals,
                ledger_at_optimum: Some(ledger),
            });
        }
    }

    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let ledger = ledger_with_m(link, sec, T::of(mid as f64))?;
        evals += 1;
        if ledger.feasible {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let ledger = ledger_with_m(link, sec, T::of(hi as f64))?;
    evals += 1;
    Ok(OptimizationResult {
        argmax: T::of(hi as f64),
        value: ledger.capacity,
        feasible: true,
        boundary: false,
        iterations: evals,
        ledger_at_optimum: Some(ledger),
    })
}

/// A sweepable scalar parameter of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamAxis {
    /// Source intensity `mu`.
    SourceMu,
    /// Pulse period `tau`.
    SourceTau,
    /// Channel transmission `alpha`.
    ChannelAlpha,
    /// Channel error rate `r_c`.
    ChannelRc,
    /// Detector efficiency `eta`.
    DetectorEta,
    /// Dark-count probability `r_d`.
    DetectorRd,
    /// Error-correction multiplier `x`.
    ErrorCorrectionX,
    /// Explicit interceptor yield `y`.
    EveYOverride,
    /// Block length `m`.
    SecurityM,
    /// Failure probability `epsilon`.
    SecurityEpsilon,
    /// Compression margin `g_pa`.
    SecurityGPa,
    /// Authentication parameter `g_auth`.
    SecurityGAuth,
    /// Authentication parameter `g_ec`.
    SecurityGEc,
    /// Authentication parameter `g_tilde_ec`.
    SecurityGTildeEc,
}

impl ParamAxis {
    /// Every axis, in display order.
    pub const ALL: [ParamAxis; 14] = [
        ParamAxis::SourceMu,
        ParamAxis::SourceTau,
        ParamAxis::ChannelAlpha,
        ParamAxis::ChannelRc,
        ParamAxis::DetectorEta,
        ParamAxis::DetectorRd,
        ParamAxis::ErrorCorrectionX,
        ParamAxis::EveYOverride,
        ParamAxis::SecurityM,
        ParamAxis::SecurityEpsilon,
        ParamAxis::SecurityGPa,
        ParamAxis::SecurityGAuth,
        ParamAxis::SecurityGEc,
        ParamAxis::SecurityGTildeEc,
    ];

    /// Dotted parameter name, e.g. `detector.eta`.
    pub fn name(self) -> &'static str {
        match self {
            ParamAxis::SourceMu => "source.mu",
            ParamAxis::SourceTau => "source.tau",
            ParamAxis::ChannelAlpha => "channel.alpha",
            ParamAxis::ChannelRc => "channel.r_c",
            ParamAxis::DetectorEta => "detector.eta",
            ParamAxis::DetectorRd => "detector.r_d",
            ParamAxis::ErrorCorrectionX => "error_correction.x",
            ParamAxis::EveYOverride => "eve.y_override",
            ParamAxis::SecurityM => "security.m",
            ParamAxis::SecurityEpsilon => "security.epsilon",
            ParamAxis::SecurityGPa => "security.g_pa",
            ParamAxis::SecurityGAuth => "security.g_auth",
            ParamAxis::SecurityGEc => "security.g_ec",
            ParamAxis::SecurityGTildeEc => "security.g_tilde_ec",
        }
    }

    /// Writes `value` into the parameter this axis addresses.
    pub fn apply<T: Real>(
        self,
        value: T,
        link: &mut LinkParameters<T>,
        sec: &mut SecurityParameters<T>,
    ) {
        match self {
            ParamAxis::SourceMu => link.source.mu = value,
            ParamAxis::SourceTau => link.source.tau = value,
            ParamAxis::ChannelAlpha => link.channel.alpha = value,
            ParamAxis::ChannelRc => link.channel.r_c = value,
            ParamAxis::DetectorEta => link.detector.eta = value,
            ParamAxis::DetectorRd => link.detector.r_d = value,
            ParamAxis::ErrorCorrectionX => link.error_correction.x = value,
            ParamAxis::EveYOverride => link.eve.y_override = Some(value),
            ParamAxis::SecurityM => sec.m = value,
            ParamAxis::SecurityEpsilon => sec.epsilon = value,
            ParamAxis::SecurityGPa => sec.g_pa = value,
            ParamAxis::SecurityGAuth => sec.g_auth = value,
            ParamAxis::SecurityGEc => sec.g_ec = value,
            ParamAxis::SecurityGTildeEc => sec.g_tilde_ec = value,
        }
    }
}

impl std::fmt::Display for ParamAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ParamAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamAxis::ALL
            .into_iter()
            .find(|axis| axis.name() == s)
            .ok_or_else(|| Error::UnknownAxis { given: s.to_string() })
    }
}

/// Specification of one parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<T> {
    /// Which parameter varies.
    pub axis: ParamAxis,
    /// The values it takes, in output order.
    pub grid: Vec<T>,
    /// Re-optimize the pulse intensity at every grid point.
    pub optimize_mu_per_point: bool,
    /// Intensity search interval for the per-point optimization
    /// (defaults to `[1e-4, 10]`).
    pub mu_bounds: Option<(T, T)>,
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    /// The swept parameter's value.
    pub value: T,
    /// The ledger at this point, or the domain error it provoked.
    pub outcome: Result<BudgetLedger<T>>,
    /// The per-point optimal intensity, when requested.
    pub optimized_mu: Option<T>,
}

/// All rows of one sweep, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable<T> {
    /// The swept axis.
    pub axis: ParamAxis,
    /// One row per grid value, in the order given.
    pub rows: Vec<SweepRow<T>>,
}

/// Evaluates the ledger along `spec.axis`, in parallel, preserving grid
/// order. Domain errors at individual points become error rows rather
/// than failing the whole sweep.
pub fn sweep<T: Real>(
    link: &LinkParameters<T>,
    sec: &SecurityParameters<T>,
    spec: &SweepSpec<T>,
) -> Result<SweepTable<T>> {
    if spec.grid.is_empty() {
        return Err(Error::domain("sweep grid", "at least one value", 0.0));
    }
    if spec.optimize_mu_per_point && spec.axis == ParamAxis::SourceMu {
        return Err(Error::domain(
            "sweep specification",
            "optimize_mu_per_point is incompatible with sweeping source.mu",
            f64::NAN,
        ));
    }
    let (mu_lo, mu_hi) = spec
        .mu_bounds
        .unwrap_or((T::of(1e-4), T::of(10.0)));
    let rows: Vec<SweepRow<T>> = spec
        .grid
        .par_iter()
        .map(|&v| {
            let mut l = *link;
            let mut s = *sec;
            spec.axis.apply(v, &mut l, &mut s);
            if spec.optimize_mu_per_point {
                match optimize_mu(&l, &s, mu_lo, mu_hi) {
                    Ok(r) => SweepRow {
                        value: v,
                        outcome: Ok(r
                            .ledger_at_optimum
                            .expect("intensity optimization always carries a ledger")),
                        optimized_mu: Some(r.argmax),
                    },
                    Err(e) => SweepRow {
                        value: v,
                        outcome: Err(e),
                        optimized_mu: None,
                    },
                }
            } else {
                SweepRow {
                    value: v,
                    outcome: compute_ledger(&l, &s),
                    optimized_mu: None,
                }
            }
        })
        .collect();
    Ok(SweepTable {
        axis: spec.axis,
        rows,
    })
}
