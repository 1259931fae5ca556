pub mod error;
pub mod exact;
pub mod lattice;
pub mod linalg;
pub mod mps;
pub mod observables;
pub mod overlap;
pub mod pauli;
pub mod stateprep;

pub use error::{Error, Result};
