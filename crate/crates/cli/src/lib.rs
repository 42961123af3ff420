//! Batch front-end for the vasmg solvers.
//!
//! [`run`] loads or generates one problem, solves it and writes a JSON
//! report, the convergence history, the solution and optional dumps.
//! [`compare`] solves one problem with several solvers and writes one CSV row
//! per solver, with the error against a direct solve on small systems.

pub mod artifacts;
pub mod error;
pub mod problem;
pub mod report;

use std::fmt::Write as _;
use std::path::PathBuf;

use vasmg::krylov::StopNorm;
use vasmg::multigrid::VCycleConfig;
use vasmg::solver::{solve, Outcome, SolverKind, SolverOptions};
use vasmg::sparse::matrix_market::format_vector;
use vasmg::sparse::{norm2, sparse_cholesky_solve};
use vasmg::transfer::{HierarchyConfig, WeightScheme};

use artifacts::Artifacts;
pub use error::{Category, CliError, CliResult};
pub use problem::{MaterialOverride, Problem, ProblemSource};
use report::{CompareRow, ConfigInfo, HierarchyInfo, LevelEntry, MatrixInfo, ProblemInfo, Report, ResultInfo, Timing};

/// Unknowns above which `compare` skips the direct reference solve.
pub const DEFAULT_REFERENCE_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Region-tree split threshold; `None` picks 4 in 2D and 8 in 3D.
    pub threshold: Option<usize>,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub tol: f64,
    /// `None` uses `10 sqrt(n) + 1000`.
    pub max_iters: Option<usize>,
    pub stop: StopNorm,
    pub weights: WeightScheme,
    pub coarsest_cap: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            threshold: o.hierarchy.threshold,
            pre_sweeps: o.vcycle.pre_sweeps,
            post_sweeps: o.vcycle.post_sweeps,
            tol: o.tol,
            max_iters: o.max_iters,
            stop: o.stop,
            weights: o.hierarchy.weights,
            coarsest_cap: o.hierarchy.coarsest_cap,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> CliResult<()> {
        let positive = [
            ("threshold", self.threshold.unwrap_or(1)),
            ("pre-sweeps", self.pre_sweeps),
            ("post-sweeps", self.post_sweeps),
            ("max-iters", self.max_iters.unwrap_or(1)),
            ("coarsest-cap", self.coarsest_cap),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::config(format!("--{name} must be positive")));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::config(format!("--tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            hierarchy: HierarchyConfig {
                threshold: self.threshold,
                coarsest_cap: self.coarsest_cap,
                weights: self.weights,
            },
            vcycle: VCycleConfig {
                pre_sweeps: self.pre_sweeps,
                post_sweeps: self.post_sweeps,
                ..VCycleConfig::default()
            },
            tol: self.tol,
            max_iters: self.max_iters,
            stop: self.stop,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub history_csv: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    pub dump_tree: Option<PathBuf>,
    pub dump_hierarchy: Option<PathBuf>,
    /// Stem for `.mtx`, `.rhs` and `.coords` files of the assembled system.
    pub export_system: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub material: MaterialOverride,
    pub solver: SolverKind,
    pub settings: Settings,
    pub outputs: Outputs,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: Report,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub source: ProblemSource,
    pub material: MaterialOverride,
    pub solvers: Vec<SolverKind>,
    pub settings: Settings,
    /// Systems with more unknowns get no numerical-error column.
    pub reference_cap: usize,
    pub csv: Option<PathBuf>,
}

fn check_problem(problem: &Problem, solver: SolverKind) -> CliResult<()> {
    if solver.needs_points() && problem.points.is_none() {
        return Err(CliError::config(format!("solver {solver} needs vertex coordinates (--coords)")));
    }
    Ok(())
}

fn report_for(cfg_solver: SolverKind, settings: &Settings, source: &ProblemSource, problem: &Problem, out: &Outcome) -> Report {
    let n = problem.unknowns();
    let opts = settings.options();
    let r = &out.report;
    let hierarchy = out.tree.as_ref().map(|t| HierarchyInfo {
        tree_height: t.height(),
        tree_leaves: t.retained_leaves().count(),
        operator_complexity: out.operator_complexity.unwrap_or(1.0),
        levels: out
            .levels
            .iter()
            .map(|l| LevelEntry {
                dofs: l.dofs,
                nonzeros: l.nnz,
                masked: l.masked,
                depth: l.depth,
            })
            .collect(),
    });
    Report {
        report_version: report::REPORT_VERSION,
        problem: ProblemInfo {
            source: source.kind().into(),
            description: source.describe(),
            dim: problem.dim,
        },
        matrix: MatrixInfo {
            vertices: problem.num_vertices,
            unknowns: n,
            nonzeros: problem.a.nnz(),
            symmetric: problem.a.is_symmetric(1e-12),
            constrained: problem.constrained.iter().filter(|&&c| c).count(),
        },
        config: ConfigInfo {
            solver: cfg_solver.name().into(),
            threshold: cfg_solver
                .needs_points()
                .then(|| opts.hierarchy.threshold_for(problem.dim)),
            pre_sweeps: settings.pre_sweeps,
            post_sweeps: settings.post_sweeps,
            tol: settings.tol,
            max_iters: settings.max_iters.unwrap_or_else(|| vasmg::krylov::default_max_iters(n)),
            stop_norm: settings.stop.to_string(),
            weights: settings.weights.to_string(),
            coarsest_cap: settings.coarsest_cap,
        },
        result: ResultInfo {
            converged: r.converged,
            iterations: r.iterations,
            final_rel_res: r.final_rel_res(),
            initial_residual: r.res0,
            rhs_norm: r.rhs_norm,
            condition_estimate: r.condition_estimate,
        },
        timing: Timing {
            setup_seconds: r.setup_seconds,
            apply_seconds: r.apply_seconds,
            total_seconds: r.total_seconds,
        },
        hierarchy,
    }
}

fn hierarchy_dump(out: &Outcome) -> String {
    let mut s = String::from("level,dofs,nonzeros,masked,depth\n");
    for (l, info) in out.levels.iter().enumerate() {
        let depth = info.depth.map_or(String::new(), |d| d.to_string());
        let _ = writeln!(s, "{l},{},{},{},{depth}", info.dofs, info.nnz, info.masked);
    }
    s
}

/// Solves one problem and writes the requested artifacts. Nothing is written
/// unless the solve finished; a solve that hit the iteration cap still
/// writes its artifacts and reports `converged: false`.
pub fn run(cfg: &RunConfig) -> CliResult<RunSummary> {
    cfg.settings.validate()?;
    let o = &cfg.outputs;
    let wants_tree = o.dump_tree.is_some() || o.dump_hierarchy.is_some();
    if wants_tree && !cfg.solver.needs_points() {
        return Err(CliError::config(format!("--dump-tree/--dump-hierarchy need a multigrid solver, not {}", cfg.solver)));
    }
    let mut seen: Vec<&PathBuf> = Vec::new();
    for p in [&o.report, &o.history_csv, &o.solution, &o.dump_tree, &o.dump_hierarchy].into_iter().flatten() {
        if seen.contains(&p) {
            return Err(CliError::config(format!("{} named for two outputs", p.display())));
        }
        seen.push(p);
    }
    let problem = problem::load(&cfg.source, cfg.material)?;
    check_problem(&problem, cfg.solver)?;
    let outcome = solve(
        cfg.solver,
        &problem.a,
        &problem.f,
        &problem.constrained,
        problem.points.as_deref(),
        problem.dim,
        &cfg.settings.options(),
    )?;
    let report = report_for(cfg.solver, &cfg.settings, &cfg.source, &problem, &outcome);
    let mut arts = Artifacts::default();
    if let Some(p) = &o.report {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        arts.add(p.clone(), json);
    }
    if let Some(p) = &o.history_csv {
        arts.add(p.clone(), outcome.report.history_csv());
    }
    if let Some(p) = &o.solution {
        arts.add(p.clone(), format_vector(&outcome.u));
    }
    if let (Some(p), Some(tree)) = (&o.dump_tree, &outcome.tree) {
        arts.add(p.clone(), tree.dump());
    }
    if let Some(p) = &o.dump_hierarchy {
        arts.add(p.clone(), hierarchy_dump(&outcome));
    }
    if let Some(stem) = &o.export_system {
        for (p, text) in problem.export_files(stem) {
            arts.add(p, text);
        }
    }
    arts.commit()?;
    Ok(RunSummary { report, outcome })
}

/// Solves one problem with every listed solver.
pub fn compare(cfg: &CompareConfig) -> CliResult<Vec<CompareRow>> {
    cfg.settings.validate()?;
    if cfg.solvers.len() < 2 {
        return Err(CliError::config("compare needs at least two solvers"));
    }
    if let Some(s) = cfg.solvers.iter().enumerate().find_map(|(i, s)| cfg.solvers[..i].contains(s).then_some(s)) {
        return Err(CliError::config(format!("solver {s} listed twice")));
    }
    let problem = problem::load(&cfg.source, cfg.material)?;
    for &s in &cfg.solvers {
        check_problem(&problem, s)?;
    }
    let reference = if problem.unknowns() <= cfg.reference_cap {
        Some(sparse_cholesky_solve(&problem.a, &problem.f)?)
    } else {
        None
    };
    let opts = cfg.settings.options();
    let mut rows = Vec::new();
    for &s in &cfg.solvers {
        let out = solve(s, &problem.a, &problem.f, &problem.constrained, problem.points.as_deref(), problem.dim, &opts)?;
        let r = &out.report;
        rows.push(CompareRow {
            solver: s.name().into(),
            iterations: r.iterations,
            converged: r.converged,
            final_rel_res: r.final_rel_res(),
            numerical_error: reference
                .as_ref()
                .map(|u| norm2(&u.iter().zip(&out.u).map(|(a, b)| a - b).collect::<Vec<_>>())),
            setup_seconds: r.setup_seconds,
            apply_seconds: r.apply_seconds,
            total_seconds: r.total_seconds,
        });
    }
    if let Some(p) = &cfg.csv {
        let mut arts = Artifacts::default();
        arts.add(p.clone(), compare_csv(&rows)?);
        arts.commit()?;
    }
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::new(Category::OutputError, e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::new(Category::OutputError, e.to_string()))
}
