//! Assisted erasure of quantum memories.
//!
//! The crate computes Landauer work costs for resetting a memory `B` with and
//! without help from a correlated party, decides whether a designated helper
//! holds *exclusive* control over the erasure, simulates the
//! dephase / announce / correct / verify protocol against adversarial
//! helpers, and keeps the entropy ledger of compression-based erasure with
//! its verify-or-revert control flow.
//!
//! All entropies and work values are in bits (units of `k_B T ln 2`).
//! Subsystems are ordered `A = 0`, `B = 1`, `E = 2`, and composite indices
//! follow the row-major Kronecker convention: the last subsystem varies
//! fastest.

#![forbid(unsafe_code)]
// `!(x >= 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod error;
pub mod exec;
pub mod formats;
pub mod measurements;
pub mod numerics;
pub mod optim;
pub mod recovery;
pub mod semidi;
pub mod states;
pub mod werner;

pub use error::{Error, Result};
pub use exec::Execution;
pub use measurements::{ConditionalEnsemble, ProjectiveBasis, RankOnePOVM};
pub use numerics::{HermitianOperator, ProbabilityDistribution};
pub use states::DensityMatrix;

/// Version tag written into every JSON document this crate emits.
pub const FORMAT_VERSION: u32 = 1;
