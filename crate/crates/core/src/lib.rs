//! Fed-batch bioreactor simulation and optimal-control analysis with
//! metabolism modeled by a flux-balance linear program.

pub mod kinetics;
pub mod lp;
pub mod surrogate;
pub mod ode;
pub mod schedule;
pub mod dynamics;
pub mod adjoint;
pub mod singular;
pub mod oxygen;
pub mod optimizer;
pub mod scenario;
pub mod io;
