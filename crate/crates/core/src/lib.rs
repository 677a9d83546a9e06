//! Effective stability of Mercury's 3:2 spin–orbit resonance.
//!
//! The pipeline runs from the averaged resonant Hamiltonian
//! ([`hamiltonian`]) through Cassini state 1 and the untangled action–angle
//! form ([`cassini`]), a Birkhoff normal form ([`birkhoff`]) built on the
//! Poisson-series algebra of [`pseries`], to effective stability times
//! ([`stability`]) and two-parameter sweeps ([`sweep`]).

pub mod birkhoff;
pub mod cassini;
pub mod eccentricity;
pub mod error;
pub mod hamiltonian;
pub mod jet;
pub mod params;
pub mod pipeline;
pub mod pseries;
pub mod stability;
pub mod sweep;

pub use error::{Error, Result};
pub use params::PhysicalParams;
