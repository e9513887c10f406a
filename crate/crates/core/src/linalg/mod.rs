//! Sparse and dense numerical kernels plus the dense verification oracles.

mod dense;
mod market;
mod sparse;
mod vector;

pub use dense::{
    dense_norm, dense_singular_bounds, dense_solve, dense_symmetric_eigenvalues, DenseOracle,
    DEFAULT_DENSE_CAP,
};
pub use market::{
    read_matrix_market, read_vector_market, write_matrix_market, write_vector_market,
};
pub use sparse::{hermitian_dilation, spmv, SparseMatrix};
pub use vector::{axpy, dot, norm2, DenseVector};
