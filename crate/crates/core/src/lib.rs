//! Fourier analysis of Boolean functions over Z_2^n and Z_p^n, parity decision
//! tree synthesis driven by the spectral norm, and a membership-query learner.
//!
//! Conventions: `+1` is False and `-1` is True; bit `i` of a point or mask is
//! variable `x_{i+1}`.

pub mod bits;
pub mod boolfn;
pub mod cli;
pub mod error;
pub mod exec;
pub mod km;
pub mod pdt;
pub mod restriction;
pub mod selftest;
pub mod zp;

pub use boolfn::{BooleanFunction, FunctionKind, Sign, Spectrum};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use pdt::{FunctionalPdt, ParityDecisionTree};
pub use restriction::{AffineRestriction, LinearForm, Mode, RestrictionChain};

use rand::SeedableRng;

/// Exact rational used for norms and coefficients on the Z_2 path.
pub type Rational = num_rational::Ratio<i64>;

/// The generator behind every randomized routine.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}
