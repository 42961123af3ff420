//! One-call drivers for the solver configurations the command line exposes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::krylov::{default_max_iters, pcg, Identity, Jacobi, PcgConfig, SolveReport, StopNorm};
use crate::mesh::Point;
use crate::multigrid::{mg_solve, VCycleConfig, VasmgPreconditioner};
use crate::region_tree::RegionTree;
use crate::smoothers::gs_solve_observed;
use crate::sparse::{norm2, CsrMatrix};
use crate::transfer::{Hierarchy, HierarchyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    PcgVasmg,
    PcgPlain,
    PcgJacobi,
    Gs,
    MgStandalone,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [Self::PcgVasmg, Self::PcgPlain, Self::PcgJacobi, Self::Gs, Self::MgStandalone];

    pub fn name(self) -> &'static str {
        match self {
            Self::PcgVasmg => "pcg-vasmg",
            Self::PcgPlain => "pcg-plain",
            Self::PcgJacobi => "pcg-jacobi",
            Self::Gs => "gs",
            Self::MgStandalone => "mg-standalone",
        }
    }

    /// Whether the solver needs vertex coordinates.
    pub fn needs_points(self) -> bool {
        matches!(self, Self::PcgVasmg | Self::MgStandalone)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub hierarchy: HierarchyConfig,
    pub vcycle: VCycleConfig,
    pub tol: f64,
    /// `None` uses `10 sqrt(n) + 1000`.
    pub max_iters: Option<usize>,
    pub stop: StopNorm,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            hierarchy: HierarchyConfig::default(),
            vcycle: VCycleConfig::default(),
            tol: 1e-6,
            max_iters: None,
            stop: StopNorm::Rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelInfo {
    pub dofs: usize,
    pub nnz: usize,
    /// DOFs excluded from coarse correction.
    pub masked: usize,
    pub depth: Option<u32>,
    pub setup_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub u: Vec<f64>,
    pub report: SolveReport,
    /// Present for the multigrid solvers.
    pub tree: Option<RegionTree>,
    pub levels: Vec<LevelInfo>,
    pub operator_complexity: Option<f64>,
}

/// Region tree, hierarchy and V-cycle preconditioner for `a`.
pub fn build_vasmg(
    a: &CsrMatrix,
    constrained: &[bool],
    points: &[Point],
    dim: usize,
    opts: &SolverOptions,
) -> Result<(RegionTree, VasmgPreconditioner)> {
    let tree = RegionTree::build(points, dim, opts.hierarchy.threshold_for(dim))?;
    let h = Hierarchy::from_tree(a, constrained, &tree, &opts.hierarchy)?;
    let pre = VasmgPreconditioner::new(h, opts.vcycle)?;
    Ok((tree, pre))
}

/// Solves `A U = F` from a zero initial guess with the chosen solver.
/// `points` and `dim` are required by the multigrid solvers.
pub fn solve(
    kind: SolverKind,
    a: &CsrMatrix,
    f: &[f64],
    constrained: &[bool],
    points: Option<&[Point]>,
    dim: usize,
    opts: &SolverOptions,
) -> Result<Outcome> {
    let n = a.nrows();
    let u0 = vec![0.0; n];
    let k_max = opts.max_iters.unwrap_or_else(|| default_max_iters(n));
    let pcfg = PcgConfig {
        tol: opts.tol,
        max_iters: Some(k_max),
        stop: opts.stop,
        ..PcgConfig::default()
    };
    let setup_start = Instant::now();
    let mut outcome = Outcome {
        u: Vec::new(),
        report: SolveReport::default(),
        tree: None,
        levels: Vec::new(),
        operator_complexity: None,
    };
    let (u, report) = match kind {
        SolverKind::PcgPlain => {
            let (u, r) = pcg(a, f, &Identity, &u0, &pcfg)?;
            (u, r.with_setup(0.0))
        }
        SolverKind::PcgJacobi => {
            let jac = Jacobi::new(a)?;
            let setup = setup_start.elapsed().as_secs_f64();
            let (u, r) = pcg(a, f, &jac, &u0, &pcfg)?;
            (u, r.with_setup(setup))
        }
        SolverKind::PcgVasmg | SolverKind::MgStandalone => {
            let points = points.ok_or_else(|| {
                Error::InvalidArgument(format!("solver {kind} needs vertex coordinates"))
            })?;
            let (tree, pre) = build_vasmg(a, constrained, points, dim, opts)?;
            let setup = setup_start.elapsed().as_secs_f64();
            let h = pre.hierarchy();
            outcome.levels = h
                .levels()
                .iter()
                .map(|l| LevelInfo {
                    dofs: l.num_dofs(),
                    nnz: l.a.nnz(),
                    masked: l.masked.iter().filter(|&&m| m).count(),
                    depth: l.depth,
                    setup_seconds: l.setup_seconds,
                })
                .collect();
            outcome.operator_complexity = Some(h.operator_complexity());
            outcome.tree = Some(tree);
            let (u, r) = if kind == SolverKind::PcgVasmg {
                pcg(a, f, &pre, &u0, &pcfg)?
            } else {
                let (u, mut r) = mg_solve(&pre, f, &u0, k_max, opts.tol)?;
                if opts.stop == StopNorm::Rhs && r.rhs_norm > 0.0 {
                    let s = r.res0 / r.rhs_norm;
                    r.rel_res_history.iter_mut().for_each(|x| *x *= s);
                }
                (u, r)
            };
            (u, r.with_setup(setup))
        }
        SolverKind::Gs => {
            let start = Instant::now();
            let fnorm = norm2(f);
            // zero initial guess: ||F - A U0|| = ||F|| under either stopping norm
            let denom = fnorm;
            let mut history = vec![if denom > 0.0 { 1.0 } else { 0.0 }];
            let mut elapsed = vec![0.0];
            let mut au = vec![0.0; n];
            let sol = gs_solve_observed(a, f, &u0, k_max, opts.tol, |_, u| {
                a.spmv_into(u, &mut au).expect("dimensions checked by the smoother");
                let r = norm2(&f.iter().zip(&au).map(|(x, y)| x - y).collect::<Vec<_>>());
                history.push(if denom > 0.0 { r / denom } else { 0.0 });
                elapsed.push(start.elapsed().as_secs_f64());
            })?;
            let report = SolveReport {
                iterations: history.len() - 1,
                rel_res_history: history,
                elapsed,
                converged: sol.converged,
                res0: fnorm,
                rhs_norm: fnorm,
                ..SolveReport::default()
            };
            let apply = start.elapsed().as_secs_f64();
            let report = SolveReport {
                apply_seconds: apply,
                ..report
            };
            (sol.u, report.with_setup(0.0))
        }
    };
    outcome.u = u;
    outcome.report = report;
    Ok(outcome)
}
