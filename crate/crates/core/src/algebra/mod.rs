//! Operators and states on composite qubit/qutrit/cavity Hilbert spaces.

mod layout;
mod operator;
mod sparse;
mod state;

pub use layout::{Factor, FactorKind, SpaceLayout};
pub use operator::{
    annihilation, cavity_annihilation, cavity_number, embed, embed_block, OperatorMatrix,
};
pub use sparse::CsrMatrix;
pub(crate) use state::expect_vector;
pub use state::{expectation, spin_basis_states, DensityMatrix, ExpectationTarget, PureState};

pub use num_complex::Complex64 as C64;
