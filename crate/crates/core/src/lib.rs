pub mod error;
pub mod graph;
pub mod hamiltonian;
pub mod hilbert;
pub mod integrator;
pub mod linalg;
pub mod observables;
pub mod sea;
pub mod simulation;
pub mod state;
pub mod subspace;

pub use error::{Error, Result};
