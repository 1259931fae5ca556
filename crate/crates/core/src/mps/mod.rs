//! Matrix product states, operators and two-site DMRG.

mod dmrg;
mod mpo;
mod state;
pub(crate) mod tensor;

pub use dmrg::{dmrg_ground_state, dmrg_with, epsilon_measure, DmrgConfig, DmrgReport};
pub use mpo::{compile_mpo, MatrixProductOperator};
pub use state::{MatrixProductState, STATEVECTOR_CAP};

/// `<a|b>`.
pub fn mps_overlap(a: &MatrixProductState, b: &MatrixProductState) -> crate::Result<crate::linalg::C64> {
    a.overlap(b)
}

/// `state ⊗ pad` with the pad as a new rightmost site.
pub fn append_site(state: &MatrixProductState, pad: &[crate::linalg::C64]) -> crate::Result<MatrixProductState> {
    state.append_site(pad)
}
