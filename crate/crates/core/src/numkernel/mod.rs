//! Dense complex linear algebra: Hermitian eigensolver, spectral matrix
//! functions, Kronecker products and partial traces.

mod eigen;
mod funcs;
mod linsolve;
mod matrix;

pub use eigen::{eigenvalues, hermitian_eig, min_eigenvalue, HermitianEigen, HERMITIAN_TOL};
pub use funcs::{
    expm_hermitian, matrix_function, partial_trace, partial_transpose_b, spectral_function,
    tensor_product, unitary_propagator, Keep, MatFn, EIGEN_FLOOR,
};
pub use linsolve::solve_spd;
pub use matrix::{ops, ComplexMatrix, C64, I, ONE, ZERO};
