//! Tensegrity statics, modal analysis, and surrogate training.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — dense linear-algebra helpers, a deterministic RNG, and a
//!   scalar minimizer shared by every other module.
//! * [`topology`] — structure descriptions (nodes, connectivity, member
//!   properties) and the three built-in benchmark generators.
//! * [`statics`] — force densities, stiffness/equilibrium operators, and the
//!   regularized Newton form-finding solver.
//! * [`modal`] — consistent mass matrix, tangent stiffness, and natural
//!   frequencies about a converged state.
//! * [`dataset`] — actuation sampling, batch solving, and normalized CSV
//!   datasets.
//! * [`surrogate`] — a small feedforward network trained with Adam on those
//!   datasets, plus the repeated-trial evaluation protocol.
//!
//! All floating-point work is `f64` and every randomized step is driven by an
//! explicit seed, so identical inputs produce bit-identical outputs.

pub mod dataset;
pub mod error;
pub mod modal;
pub mod numerics;
pub mod statics;
pub mod surrogate;
pub mod topology;

pub use error::Error;

/// Re-exported so downstream crates build vectors/matrices against the same
/// linear-algebra version this crate was compiled with.
pub use nalgebra;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
