//! `vasmg` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vasmg::krylov::StopNorm;
use vasmg::mesh::{MeshFormat, MeshKind};
use vasmg::solver::SolverKind;
use vasmg::transfer::WeightScheme;
use vasmg_cli::{
    compare, run, Category, CliError, CompareConfig, MaterialOverride, Outputs, ProblemSource, RunConfig, Settings,
    DEFAULT_REFERENCE_CAP,
};

#[derive(Parser)]
#[command(name = "vasmg", version, about = "Auxiliary space multigrid preconditioned solvers for linear elasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write a report.
    Run(RunArgs),
    /// Solve one problem with several solvers and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["mesh", "generate", "matrix"])))]
struct ProblemArgs {
    /// Mesh file (.node/.ele stem or gmsh v2); needs --bc.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// node-ele or gmsh.
    #[arg(long, default_value = "node-ele")]
    mesh_format: String,
    /// Generated geometry: hole-plate, ring-quadrant, square-hole-plate, dam-trapezoid, box-3d.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long, default_value_t = 0)]
    refinement: u32,
    /// Matrix Market system matrix.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Right-hand side for --matrix, one value per line (default A * ones).
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    /// Vertex coordinates for --matrix, one vertex per line.
    #[arg(long, requires = "matrix")]
    coords: Option<PathBuf>,
    /// Boundary condition and material file.
    #[arg(long)]
    bc: Option<PathBuf>,
    /// Young's modulus override.
    #[arg(long)]
    youngs: Option<f64>,
    /// Poisson ratio override.
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Region-tree split threshold (default 4 in 2D, 8 in 3D).
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pre_sweeps: usize,
    #[arg(long, default_value_t = 3)]
    post_sweeps: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap (default 10 sqrt(n) + 1000).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative residual denominator: rhs or initial-residual.
    #[arg(long, default_value = "rhs")]
    stop_norm: String,
    /// Use the literal distance weights instead of multilinear hat functions.
    #[arg(long)]
    paper_literal_weights: bool,
    /// Dense solve at the first level with at most this many DOFs.
    #[arg(long, default_value_t = 5000)]
    coarsest_cap: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// pcg-vasmg, pcg-plain, pcg-jacobi, gs or mg-standalone.
    #[arg(long, default_value = "pcg-vasmg")]
    solver: String,
    /// JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Convergence history CSV.
    #[arg(long)]
    history_csv: Option<PathBuf>,
    /// Solution vector, one value per line.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Text listing of the region tree.
    #[arg(long)]
    dump_tree: Option<PathBuf>,
    /// CSV of the level sizes.
    #[arg(long)]
    dump_hierarchy: Option<PathBuf>,
    /// Writes STEM.mtx, STEM.rhs and STEM.coords.
    #[arg(long, value_name = "STEM")]
    export_system: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Comma-separated solvers, at least two.
    #[arg(long, value_delimiter = ',', required = true)]
    solver: Vec<String>,
    /// Unknowns above which no direct reference is computed.
    #[arg(long, default_value_t = DEFAULT_REFERENCE_CAP)]
    reference_cap: usize,
    /// Comparison CSV (printed to stdout when absent).
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parsed<T: std::str::FromStr<Err = vasmg::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: vasmg::Error| CliError::config(e.to_string()))
}

impl ProblemArgs {
    fn source(&self) -> Result<ProblemSource, CliError> {
        if let Some(path) = &self.mesh {
            let bc = self.bc.clone().ok_or_else(|| CliError::config("--mesh needs --bc"))?;
            Ok(ProblemSource::Mesh {
                path: path.clone(),
                format: parsed::<MeshFormat>(&self.mesh_format)?,
                bc,
            })
        } else if let Some(kind) = &self.generate {
            Ok(ProblemSource::Generate {
                kind: parsed::<MeshKind>(kind)?,
                refinement: self.refinement,
                bc: self.bc.clone(),
            })
        } else {
            let matrix = self.matrix.clone().expect("clap requires a source");
            if self.bc.is_some() {
                return Err(CliError::config("--bc does not apply to --matrix"));
            }
            Ok(ProblemSource::Matrix {
                matrix,
                rhs: self.rhs.clone(),
                coords: self.coords.clone(),
            })
        }
    }

    fn material(&self) -> MaterialOverride {
        MaterialOverride {
            youngs_modulus: self.youngs,
            poisson_ratio: self.nu,
        }
    }
}

impl SolverArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        Ok(Settings {
            threshold: self.threshold,
            pre_sweeps: self.pre_sweeps,
            post_sweeps: self.post_sweeps,
            tol: self.tol,
            max_iters: self.max_iters,
            stop: parsed::<StopNorm>(&self.stop_norm)?,
            weights: if self.paper_literal_weights {
                WeightScheme::PaperLiteral
            } else {
                WeightScheme::Multilinear
            },
            coarsest_cap: self.coarsest_cap,
        })
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let cfg = RunConfig {
                source: a.problem.source()?,
                material: a.problem.material(),
                solver: parsed::<SolverKind>(&a.solver)?,
                settings: a.solver_args.settings()?,
                outputs: Outputs {
                    report: a.report,
                    history_csv: a.history_csv,
                    solution: a.solution,
                    dump_tree: a.dump_tree,
                    dump_hierarchy: a.dump_hierarchy,
                    export_system: a.export_system,
                },
            };
            let summary = run(&cfg)?;
            let r = &summary.report;
            println!(
                "{} {}: {} unknowns, {} iterations, rel_res {:.3e}, setup {:.3} s, apply {:.3} s",
                r.config.solver,
                r.problem.description,
                r.matrix.unknowns,
                r.result.iterations,
                r.result.final_rel_res,
                r.timing.setup_seconds,
                r.timing.apply_seconds
            );
            if !r.result.converged {
                return Err(CliError::new(
                    Category::NotConverged,
                    format!("no convergence to {} in {} iterations", r.config.tol, r.result.iterations),
                ));
            }
            Ok(())
        }
        Command::Compare(a) => {
            let cfg = CompareConfig {
                source: a.problem.source()?,
                material: a.problem.material(),
                solvers: a.solver.iter().map(|s| parsed::<SolverKind>(s)).collect::<Result<_, _>>()?,
                settings: a.solver_args.settings()?,
                reference_cap: a.reference_cap,
                csv: a.csv.clone(),
            };
            let rows = compare(&cfg)?;
            if a.csv.is_none() {
                print!("{}", String::from_utf8_lossy(&vasmg_cli::compare_csv(&rows)?));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.category.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
