pub mod elementary;
pub mod interval;
pub mod residual;
pub mod source;
pub mod weights;

pub use interval::CertifiedReal;
pub use residual::{dot_residual, max_bits_from_env, residual_at, FixedTheta, DEFAULT_MAX_BITS};
pub use source::{certified_compare, parse_rational, Comparison, RealSource, Refinable, TargetVector};
pub use weights::{weighted_height, WeightVector};

/// `‖x‖`, the distance to the nearest integer.
pub fn dist_to_nearest_int(x: &CertifiedReal) -> CertifiedReal {
    x.dist_to_nearest_int()
}
