//! Sparse and dense-block primitives: CSR storage, block vectors, the
//! Frobenius/diamond algebra of global Krylov methods and Matrix Market I/O.

mod block;
mod csr;
pub mod mtx;
mod multivector;

pub use block::BlockVector;
pub use csr::{CsrMatrix, TripletBuilder};
pub use mtx::{mm_read, mm_write};
pub use multivector::{diamond, frobenius_inner, mv_apply, MultiVector};
