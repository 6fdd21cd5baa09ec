//! Collision layer: Fermi-rule rate matrices, the master equation they
//! generate, random-phase averaging on small Fock spaces, the current
//! density, and the streaming-plus-collision Boltzmann step.

mod boltzmann;
mod current;
mod fock;
mod master;
mod rates;

pub use boltzmann::{drifting_maxwellian, evolve_boltzmann, BoltzmannStep};
pub use current::{current_density, current_profile};
pub use fock::{incoherent_average, number_correlator, random_phase_average, FockEnsemble, MonteCarloEstimate};
pub use master::{
    entropy, evolve_master, evolve_master_expm, evolve_master_uniformized, propagator_expm, propagator_uniformized,
    EXPM_MAX_STATES,
};
pub use rates::{fermi_rates, gaussian_delta, InteractionMatrix, RateMatrix, StateSpace};
