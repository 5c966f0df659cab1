//! Observables and exponential fits of population curves.

mod fit;
mod observables;

pub use fit::{extract_dephasing_rate, fit_exponential, FitError, FitResult, FitWindow, DEFAULT_FIT_START_NS};
pub use observables::{
    build_observable_set, pair_sector_name, photon_number_name, Observable, ObservableKind, AKLT_POPULATION,
};
