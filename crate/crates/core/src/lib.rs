//! Qudit Hamiltonians on qubit hardware: encodings, variational solvers and an
//! exact-diagonalization reference.

pub mod circuit;
pub mod encoding;
pub mod error;
pub mod lbfgs;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod pauli;
pub mod sparse;
pub mod vqe;
pub mod vte;

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;

pub use encoding::{Encoder, EncodingKind, PenaltyConfig};
pub use error::{Error, Result};
pub use models::{bbh_model, bose_hubbard_model, spin_matrices, Frame, ModelDescriptor, QuditModel};
pub use pauli::{Pauli, PauliString, PauliSum};
pub use sparse::SparseOperator;
