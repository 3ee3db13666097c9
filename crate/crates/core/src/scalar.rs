//! Scalar abstraction for the analytic engine.
//!
//! Every closed-form routine in this crate is written once, generically,
//! against [`Real`] and instantiated at `f32` or `f64`. The trait is a
//! thin bundle of the `num-traits` float capabilities the engine
//! actually uses plus a single convenience constructor, [`Real::of`],
//! for embedding exact `f64` literals (series coefficients, thresholds)
//! into generic code.

use std::fmt::{Debug, Display};

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the budget engine.
///
/// Implemented for `f32` and `f64`. The supertraits supply arithmetic,
/// transcendentals (`exp`, `ln`, `expm1`, `sqrt`, ...), mathematical
/// constants, and conversion from primitives; `Send + Sync + 'static`
/// lets ledger computations fan out across threads.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Embeds an `f64` constant into this scalar type (rounding once, at
    /// the boundary, for `f32`).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn of_roundtrips_f64_exactly() {
        let x = 0.588_717_693_320_912_9_f64;
        assert_eq!(<f64 as Real>::of(x), x);
    }

    #[test]
    fn of_rounds_once_for_f32() {
        let x = 0.1_f64;
        assert_eq!(<f32 as Real>::of(x), 0.1_f32);
    }

    #[test]
    fn generic_fn_works_for_both_widths() {
        fn half_life<T: Real>() -> T {
            T::LN_2() / T::of(2.0)
        }
        assert!((half_life::<f64>() - 0.346_573_590_279_972_65).abs() < 1e-15);
        assert!((half_life::<f32>() - 0.346_573_6_f32).abs() < 1e-6);
    }
}
