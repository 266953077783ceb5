//! Flux-balance linear program coupling intracellular metabolism to the
//! extracellular dynamics.

mod fba;
pub(crate) mod simplex;

pub use fba::{
    basis_changed, local_surrogate, solve_fba, BasisId, FbaSolver, LpError, LpOutcome, LpStatus,
    Dims, MetabolicNetwork, NetworkError, NetworkFile, Pins,
};
