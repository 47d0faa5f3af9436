//! Multipartite quantum channels, LOCC protocol trees, and measurement-outcome
//! compression.
//!
//! The crate models a quantum channel by its Kraus operators, represents an
//! LOCC protocol for that channel as a rooted tree whose nodes carry kappa x
//! kappa positive semidefinite coefficient matrices, validates such trees
//! against the structural conditions an LOCC implementation must satisfy, and
//! prunes linearly dependent measurement outcomes so that every local
//! measurement has at most kappa^2 outcomes (channel-preserving mode) or at
//! most d_alpha^2 outcomes (deterministic-task mode) while the implemented
//! channel, respectively task, is preserved.
//!
//! Modules:
//! - [`numerics`]: dense complex linear algebra with an explicit tolerance policy;
//! - [`channels`]: Kraus representations, Choi matrices, minimal representations;
//! - [`trees`]: protocol trees, the structural validator, leaf Kraus extraction;
//! - [`compress`]: the sibling-pruning algorithm and its audit reports;
//! - [`analysis`]: channel invariants (kappa, chi) and outcome-count bounds;
//! - [`harness`]: seeded generation of valid trees and redundancy injection;
//! - [`io`]: the versioned JSON file formats shared with the CLI.

pub mod analysis;
pub mod channels;
pub mod compress;
pub mod error;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod trees;

pub use error::{Error, Result};
pub use numerics::{CMatrix, CVector, Tolerances};
