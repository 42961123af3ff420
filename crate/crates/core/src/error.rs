//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix not SPD: non-positive pivot {pivot:e} at row {row}")]
    NotSpd { row: usize, pivot: f64 },

    #[error("preconditioner not SPD: <r, z> = {rho:e} at iteration {iteration}")]
    PreconditionerNotSpd { iteration: usize, rho: f64 },

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("iteration diverged after {iterations} steps (err {err:e})")]
    Diverged { iterations: usize, err: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate element {0} (zero measure)")]
    DegenerateElement(usize),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),

    #[error("system is singular: no Dirichlet constraint applied")]
    NoDirichlet,

    #[error("duplicate vertex coordinates at indices {0} and {1}")]
    DuplicateVertex(usize, usize),

    #[error("region tree: {0}")]
    Tree(String),

    #[error("point outside region: {0}")]
    OutsideRegion(String),

    #[error("hierarchy: {0}")]
    Hierarchy(String),

    #[error("Galerkin operator at level {level} is not SPD: {source}")]
    CoarseNotSpd {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
