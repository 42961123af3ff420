//! Vertex-based auxiliary space multigrid (V-ASMG) for sparse SPD systems.

pub mod elasticity;
pub mod error;
pub mod krylov;
pub mod mesh;
pub mod multigrid;
pub mod region_tree;
pub mod smoothers;
pub mod solver;
pub mod sparse;
pub mod transfer;

pub use error::{Error, Result};
