//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating-point scalar: `f32` or `f64`.
///
/// All linear algebra goes through nalgebra's `RealField`; conversions to and
/// from `f64` (literals, random draws, serialization) go through num-traits.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the underlying type.
    fn machine_epsilon() -> Self;
}

impl Scalar for f32 {
    fn machine_epsilon() -> Self {
        f32::EPSILON
    }
}

impl Scalar for f64 {
    fn machine_epsilon() -> Self {
        f64::EPSILON
    }
}

/// Numerical thresholds used by validation and rank decisions.
///
/// Defaults are tuned for `f64` on spaces of dimension up to a few hundred.
/// For lower-precision scalars every threshold is floored at a fixed multiple
/// of machine epsilon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    /// Frobenius residual for projection identities, relative to `max(1, ‖P‖_F)`.
    pub proj: T,
    /// Scalar comparisons (probabilities, normalizations, vector residuals).
    pub tol: T,
    /// Floor for cone membership (smallest admissible eigenvalue is `-cone`).
    pub cone: T,
    /// Singular values below `rank * σ_max` are treated as zero.
    pub rank: T,
    /// Threshold for the three interference verdicts.
    pub prop: T,
    /// Hermiticity of user-supplied operators.
    pub hermitian: T,
    /// Idempotence / orthogonality of user-supplied Hilbert-space projectors.
    pub projector: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        let eps = T::machine_epsilon();
        let floor = |spec: f64, mult: f64| {
            let spec = T::lit(spec);
            let f = eps * T::lit(mult);
            if spec > f {
                spec
            } else {
                f
            }
        };
        Tolerances {
            proj: floor(1e-9, 1e4),
            tol: floor(1e-9, 1e4),
            cone: floor(1e-10, 1e3),
            rank: floor(1e-8, 1e4),
            prop: floor(1e-8, 1e5),
            hermitian: floor(1e-12, 1e2),
            projector: floor(1e-10, 1e3),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_defaults_match_documented_values() {
        let t = Tolerances::<f64>::default();
        assert_eq!(t.proj, 1e-9);
        assert_eq!(t.tol, 1e-9);
        assert_eq!(t.cone, 1e-10);
        assert_eq!(t.rank, 1e-8);
        assert_eq!(t.prop, 1e-8);
    }

    #[test]
    fn f32_defaults_are_floored() {
        let t = Tolerances::<f32>::default();
        assert!(t.proj > 1e-4);
        assert!(t.hermitian > 1e-6);
    }
}
