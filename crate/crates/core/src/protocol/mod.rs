//! Hamiltonians and dissipators of the driven-dissipative stabilization
//! protocol for a chain of qutrits coupled through shared cavities.

mod bell;
mod builders;
pub mod config;
mod hamiltonian;
pub mod ops;

pub use bell::{build_qubit_bell_scenario, BellParams, BellScenario};
pub use builders::{
    build_collapse_channels, build_full_hamiltonian, build_n_photon_drive, build_probe,
    build_system_hamiltonian, build_zero_photon_drive, cavity_factor, qutrit_factor,
    CollapseChannel,
};
pub use config::{
    mhz_to_rad_per_ns, rad_per_ns_to_mhz, CavityParams, ChainConfig, DriveVariant, QutritCoherence,
};
pub use hamiltonian::{Modulation, TimeDependentHamiltonian};
