//! Truncated-jet machinery for KAM tori near an elliptic fixed point.
//!
//! The crate is organised bottom-up: [`series`] provides the sparse
//! polynomial ring, [`decomp`] and [`smalldiv`] the linear operators on it,
//! [`symplectic`] the near-identity maps, [`bnf`] the Birkhoff normal form and
//! [`kam`] the counterterm scheme with its numerical experiments.
//! [`experiments`] holds the benchmark Hamiltonians and scripted scenarios.

pub mod error;
pub mod series;
pub mod decomp;
pub mod smalldiv;
pub mod symplectic;
pub mod bnf;
pub mod kam;
pub mod experiments;

pub use error::{KamError, Result};
pub use series::{c64, Mono, Series, Space, Var, C64};
