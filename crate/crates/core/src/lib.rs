//! Conditioned lattice random-walk bridges, subcritical bond-percolation
//! clusters conditioned on a two-point connection, and the regeneration
//! skeletons linking the two.
//!
//! Everything comes in two flavours: exact rational oracles for small
//! instances (dynamic programming and exhaustive enumeration) and seeded
//! Monte Carlo at desk scale, with the [`analysis`] layer turning ensembles
//! into pass/fail reports.

pub mod analysis;
pub mod bridge;
pub mod error;
pub mod experiment;
mod grid;
pub mod lattice_walk;
pub mod percolation;
pub mod prob;
pub mod seeding;

pub use error::{Error, Result};
