//! JSON run report and comparison rows.

use serde::Serialize;

/// Bumped whenever a field changes meaning; `schema/report.schema.json` follows it.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub problem: ProblemInfo,
    pub matrix: MatrixInfo,
    pub config: ConfigInfo,
    pub result: ResultInfo,
    pub timing: Timing,
    pub hierarchy: Option<HierarchyInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInfo {
    pub source: String,
    pub description: String,
    /// 0 for a matrix given without coordinates.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixInfo {
    pub vertices: Option<usize>,
    pub unknowns: usize,
    pub nonzeros: usize,
    pub symmetric: bool,
    pub constrained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigInfo {
    pub solver: String,
    pub threshold: Option<usize>,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub stop_norm: String,
    pub weights: String,
    pub coarsest_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultInfo {
    pub converged: bool,
    pub iterations: usize,
    pub final_rel_res: f64,
    pub initial_residual: f64,
    pub rhs_norm: f64,
    pub condition_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    /// Region tree, transfer and Galerkin operators, smoother setup.
    pub setup_seconds: f64,
    /// Iteration loop.
    pub apply_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyInfo {
    pub tree_height: u32,
    pub tree_leaves: usize,
    pub operator_complexity: f64,
    pub levels: Vec<LevelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEntry {
    pub dofs: usize,
    pub nonzeros: usize,
    pub masked: usize,
    pub depth: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub solver: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_rel_res: f64,
    /// `||U - U_ref||_2`; empty when no reference was computed.
    pub numerical_error: Option<f64>,
    pub setup_seconds: f64,
    pub apply_seconds: f64,
    pub total_seconds: f64,
}
