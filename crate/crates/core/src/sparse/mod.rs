//! Sparse and dense linear algebra primitives.

mod csr;
mod dense;
pub mod envelope;
pub mod matrix_market;
pub mod vector;

pub use csr::{triple_product, CsrMatrix};
pub use dense::{dense_cholesky_solve, Cholesky, DenseMatrix};
pub use envelope::{dependent_columns, sparse_cholesky_solve, EnvelopeCholesky};
pub use vector::{axpy, dot, norm2};
