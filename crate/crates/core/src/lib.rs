//! Quantum-to-classical correspondence on desk-scale grids.
//!
//! The crate evolves a wave function with a split-step Schrödinger solver,
//! projects it onto carrier waves over finite windows to obtain a smooth
//! phase-space envelope, and compares the resulting density with classical
//! Liouville transport. A Fermi-rate collision layer turns the transport
//! into a Boltzmann equation, and a small many-body module checks the
//! determinant identities that carry the construction to many particles.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correspondence;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod io;
pub mod kinetics;
pub mod liouville;
pub mod manybody;
pub mod schrodinger;

pub use error::{Error, Result};
pub use grid::{
    conjugate_momentum_grid, phase_space_mass, Boundary, MomentumGrid, PhaseSpaceDensity, PhaseSpaceGrid,
    PhysicalConstants, SpatialGrid,
};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/wave-packets.md")]
mod book_wave_packets {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/envelopes.md")]
mod book_envelopes {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/transport.md")]
mod book_transport {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/many-body.md")]
mod book_many_body {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/kinetics.md")]
mod book_kinetics {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scenarios.md")]
mod book_scenarios {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/limits.md")]
mod book_limits {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
