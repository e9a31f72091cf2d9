//! Dense oracles for desk-scale verification and the spectral checks of
//! the regularized preconditioner.

mod dense;
mod eigen;
mod spectral;

pub use dense::{
    cholesky, cholesky_solve, rank, solve_lower, solve_lower_transpose, DenseMatrix, LuFactor, ORACLE_LIMIT,
};
pub use eigen::{gen_sym_eigen, gen_sym_eigen_pairs, general_pencil_eigen, jacobi_eigen, PencilEigen, SymEigen};
pub use spectral::{
    beta_limit_check, block_factors, verify_block_factorization, verify_pressure_spectrum, verify_pressure_spectrum_dense,
    DenseSaddle, EigenReport, FactorizationReport, SignCheck, SpectrumReport,
};
