//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the solver, dataset, and training
/// pipeline. Variants carry enough context to point at the offending member,
/// sample, or iteration.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument was out of range (non-positive length, bad
    /// fraction, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A structure failed validation (duplicate members, isolated nodes,
    /// index out of range, ...).
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    /// Two operands had incompatible sizes.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A member's endpoints (nearly) coincide, so its direction is undefined.
    #[error("member {index} is degenerate (length {length:.3e})")]
    DegenerateMember { index: usize, length: f64 },

    /// A member was given a non-positive rest length, e.g. by over-shortening
    /// an actuated cable.
    #[error("member {index} has non-positive rest length {rest_length:.6}")]
    InvalidRestLength { index: usize, rest_length: f64 },

    /// A matrix expected to be symmetric was not.
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    /// Factorization hit a non-positive pivot; the matrix is not positive
    /// definite (for the solver this signals an insufficient shift).
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The mass matrix could not be factored; some member has no mass.
    #[error("mass matrix is not positive definite")]
    MassNotPositiveDefinite,

    /// The line-search objective became non-finite.
    #[error("line search produced a non-finite value at step {delta:.6e}")]
    LineSearch { delta: f64 },

    /// The Newton iteration ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { residual: f64, iterations: usize },

    /// A load case asked for gravity on a free-floating structure.
    #[error("gravity requires at least one fixed node")]
    GravityWithoutSupport,

    /// A dataset sample failed to solve; generation aborts rather than
    /// resampling so that sample indices stay meaningful.
    #[error("dataset sample {sample} failed (dl = {dl:?}): {source}")]
    Generation {
        sample: usize,
        dl: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    /// A sample's output row did not match the dataset layout (e.g. an
    /// unexpected zero-mode count changed the frequency count).
    #[error("dataset sample {sample}: {reason}")]
    LayoutMismatch { sample: usize, reason: String },

    /// A split fraction left one side empty.
    #[error("split fraction {fraction} leaves an empty partition for {n} samples")]
    EmptySplit { fraction: f64, n: usize },

    /// Training diverged (non-finite loss).
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },

    /// A file could not be parsed as a dataset/model/structure.
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
