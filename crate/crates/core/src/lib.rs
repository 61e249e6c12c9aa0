//! Exact martingale calculus on Cantor space.
//!
//! The crate implements a small verified toolkit for betting strategies
//! (martingales) over probability measures on the space of infinite binary
//! sequences. Everything is computed in exact rational arithmetic; dyadic
//! approximation is applied only at the edges, where a caller asks for a
//! finite-precision answer.
//!
//! Layering, bottom to top:
//!
//! * [`numerics`] - arbitrary-precision rationals and one-sided dyadic
//!   approximation.
//! * [`cantor`] - bit strings, prefix sets, clopen sets, and the standard
//!   length-lexicographic enumeration.
//! * [`measure`] - probability measures on Cantor space: uniform, coin-toss
//!   with per-position biases, and finite tables.
//! * [`martingale`] - the martingale expression tree, exact evaluation,
//!   verification, Robin Hood regularization.
//! * [`splitting`] - splitting operators: cylinder measurements, the
//!   boolean-combination algebra, sequence unions with explicit moduli, null
//!   covers and their conversions.
//! * [`diagonal`] - diagonalization against a martingale under a measure
//!   bound, and the zero-one success-probability transform.
//! * [`harness`] - seeded random martingales and the invariant suite.
//! * [`pipeline`] - the JSON configuration dialect shared with the CLI.

pub mod cantor;
pub mod diagonal;
mod error;
pub mod harness;
pub mod martingale;
pub mod measure;
pub mod numerics;
pub mod pipeline;
pub mod splitting;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
