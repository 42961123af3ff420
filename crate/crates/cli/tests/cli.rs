use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::JSONSchema;
use serde_json::Value;
use vasmg::krylov::{pcg, Identity, PcgConfig, StopNorm};
use vasmg::mesh::{rectangle_mesh, write_node_ele, MeshFormat, MeshKind};
use vasmg::solver::SolverKind;
use vasmg::sparse::matrix_market::{read_matrix_market, read_vector};
use vasmg_cli::{compare, run, Category, CompareConfig, MaterialOverride, Outputs, ProblemSource, RunConfig, Settings};

const BIN: &str = env!("CARGO_BIN_EXE_vasmg");

fn schema() -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&v).expect("schema compiles")
}

fn assert_valid(report: &Value) {
    let s = schema();
    let msgs: Vec<String> = match s.validate(report) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("report violates schema: {msgs:?}");
}

/// Cantilever strip written as a `.node`/`.ele` pair with a boundary file.
fn strip_problem(dir: &Path) -> ProblemSource {
    let mesh = rectangle_mesh(24, 6, 4.0, 1.0).unwrap();
    let stem = dir.join("strip");
    write_node_ele(&mesh, &stem).unwrap();
    let bc = dir.join("strip.bc");
    fs::write(&bc, "material 1000 0.3\nfix left xy\ntraction right 0 -1\n").unwrap();
    ProblemSource::Mesh {
        path: stem,
        format: MeshFormat::NodeEle,
        bc,
    }
}

fn run_config(source: ProblemSource, solver: SolverKind) -> RunConfig {
    RunConfig {
        source,
        material: MaterialOverride::default(),
        solver,
        settings: Settings::default(),
        outputs: Outputs::default(),
    }
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn generated_plate_converges_with_full_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let mut cfg = run_config(
        ProblemSource::Generate {
            kind: MeshKind::SquareHolePlate,
            refinement: 0,
            bc: None,
        },
        SolverKind::PcgVasmg,
    );
    cfg.outputs = Outputs {
        report: Some(p("report.json")),
        history_csv: Some(p("history.csv")),
        solution: Some(p("u.txt")),
        dump_tree: Some(p("tree.txt")),
        dump_hierarchy: Some(p("levels.csv")),
        export_system: None,
    };
    let summary = run(&cfg).unwrap();
    let r = &summary.report;
    assert!(r.result.converged);
    assert!(r.result.final_rel_res <= 1e-6);
    assert_eq!(r.matrix.unknowns, 2 * r.matrix.vertices.unwrap());
    assert!(r.matrix.symmetric);

    let json: Value = serde_json::from_str(&fs::read_to_string(p("report.json")).unwrap()).unwrap();
    assert_valid(&json);
    assert_eq!(json["result"]["iterations"], r.result.iterations);
    assert_eq!(json["matrix"]["nonzeros"], r.matrix.nonzeros);

    let history = fs::read_to_string(p("history.csv")).unwrap();
    assert_eq!(history.lines().count(), r.result.iterations + 2);
    let u = read_vector(p("u.txt")).unwrap();
    assert_eq!(u, summary.outcome.u);
    let tree = fs::read_to_string(p("tree.txt")).unwrap();
    assert!(tree.starts_with("region-tree dim=2 threshold=4"));
    let levels = fs::read_to_string(p("levels.csv")).unwrap();
    assert_eq!(levels.lines().count(), r.hierarchy.as_ref().unwrap().levels.len() + 1);
}

#[test]
fn matrix_market_run_matches_library_pcg_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("sys");
    let mut cfg = run_config(strip_problem(dir.path()), SolverKind::PcgPlain);
    cfg.outputs.export_system = Some(stem.clone());
    run(&cfg).unwrap();

    let source = ProblemSource::Matrix {
        matrix: dir.path().join("sys.mtx"),
        rhs: Some(dir.path().join("sys.rhs")),
        coords: None,
    };
    let via_cli = run(&run_config(source, SolverKind::PcgPlain)).unwrap();

    let a = read_matrix_market(dir.path().join("sys.mtx")).unwrap();
    let f = read_vector(dir.path().join("sys.rhs")).unwrap();
    let pcfg = PcgConfig {
        stop: StopNorm::Rhs,
        max_iters: Some(vasmg::krylov::default_max_iters(f.len())),
        ..PcgConfig::default()
    };
    let (u, report) = pcg(&a, &f, &Identity, &vec![0.0; f.len()], &pcfg).unwrap();
    let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&via_cli.outcome.u), bits(&u));
    assert_eq!(bits(&via_cli.outcome.report.rel_res_history), bits(&report.rel_res_history));
}

#[test]
fn exported_system_with_coordinates_reproduces_the_mesh_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = run_config(strip_problem(dir.path()), SolverKind::PcgVasmg);
    cfg.outputs.export_system = Some(dir.path().join("sys"));
    let direct = run(&cfg).unwrap();
    let source = ProblemSource::Matrix {
        matrix: dir.path().join("sys.mtx"),
        rhs: Some(dir.path().join("sys.rhs")),
        coords: Some(dir.path().join("sys.coords")),
    };
    let via_files = run(&run_config(source, SolverKind::PcgVasmg)).unwrap();
    assert_eq!(via_files.report.matrix.constrained, direct.report.matrix.constrained);
    assert_eq!(via_files.outcome.report.rel_res_history, direct.outcome.report.rel_res_history);
    assert_eq!(via_files.outcome.u, direct.outcome.u);
}

#[test]
fn reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(strip_problem(dir.path()), SolverKind::PcgVasmg);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.outcome.report.iterations, b.outcome.report.iterations);
    assert_eq!(a.outcome.report.rel_res_history, b.outcome.report.rel_res_history);
    assert_eq!(a.outcome.u, b.outcome.u);
}

fn compare_config(source: ProblemSource, solvers: Vec<SolverKind>) -> CompareConfig {
    CompareConfig {
        source,
        material: MaterialOverride::default(),
        solvers,
        settings: Settings::default(),
        reference_cap: vasmg_cli::DEFAULT_REFERENCE_CAP,
        csv: None,
    }
}

#[test]
fn vasmg_beats_plain_cg_in_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = compare_config(strip_problem(dir.path()), vec![SolverKind::PcgPlain, SolverKind::PcgVasmg]);
    cfg.csv = Some(dir.path().join("cmp.csv"));
    let rows = compare(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.converged));
    assert!(rows[1].iterations < rows[0].iterations, "{rows:?}");
    assert!(rows.iter().all(|r| r.numerical_error.is_some()));

    let text = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "solver,iterations,converged,final_rel_res,numerical_error,setup_seconds,apply_seconds,total_seconds"
    );
    assert!(lines.next().unwrap().starts_with("pcg-plain,"));
    assert!(lines.next().unwrap().starts_with("pcg-vasmg,"));

    let again = compare(&cfg).unwrap();
    let its = |rs: &[vasmg_cli::report::CompareRow]| rs.iter().map(|r| r.iterations).collect::<Vec<_>>();
    assert_eq!(its(&rows), its(&again));
}

#[test]
fn comparison_above_the_reference_cap_leaves_the_error_empty() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = compare_config(strip_problem(dir.path()), vec![SolverKind::PcgJacobi, SolverKind::PcgPlain]);
    cfg.reference_cap = 10;
    let rows = compare(&cfg).unwrap();
    assert!(rows.iter().all(|r| r.numerical_error.is_none()));
    let csv = String::from_utf8(vasmg_cli::compare_csv(&rows).unwrap()).unwrap();
    let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[4], "");
}

#[test]
fn comparison_needs_two_distinct_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let single = compare_config(strip_problem(dir.path()), vec![SolverKind::PcgVasmg]);
    assert_eq!(compare(&single).unwrap_err().category, Category::ConfigError);
    let twice = compare_config(strip_problem(dir.path()), vec![SolverKind::PcgPlain, SolverKind::PcgPlain]);
    assert_eq!(compare(&twice).unwrap_err().category, Category::ConfigError);
}

#[test]
fn config_errors_are_caught_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = run_config(strip_problem(dir.path()), SolverKind::PcgPlain);
    cfg.outputs.dump_tree = Some(dir.path().join("tree.txt"));
    assert_eq!(run(&cfg).unwrap_err().category, Category::ConfigError);

    let mut cfg = run_config(strip_problem(dir.path()), SolverKind::PcgVasmg);
    cfg.settings.pre_sweeps = 0;
    assert_eq!(run(&cfg).unwrap_err().category, Category::ConfigError);

    let source = ProblemSource::Matrix {
        matrix: dir.path().join("none.mtx"),
        rhs: None,
        coords: None,
    };
    let err = run(&run_config(source, SolverKind::PcgVasmg)).unwrap_err();
    assert_eq!(err.category, Category::InputError);
}

#[test]
fn schema_rejects_a_malformed_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = run_config(strip_problem(dir.path()), SolverKind::PcgJacobi);
    cfg.outputs.report = Some(dir.path().join("r.json"));
    run(&cfg).unwrap();
    let good: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_valid(&good);
    assert!(good["hierarchy"].is_null());
    let s = schema();
    let mut bad = good.clone();
    bad["matrix"].as_object_mut().unwrap().remove("nonzeros");
    assert!(!s.is_valid(&bad));
    let mut bad = good;
    bad["config"]["solver"] = Value::from("lu");
    assert!(!s.is_valid(&bad));
}

#[test]
fn binary_reports_input_errors_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let bc = dir.path().join("x.bc");
    fs::write(&bc, "fix left xy\n").unwrap();
    let out = Command::new(BIN)
        .args(["run", "--mesh"])
        .arg(dir.path().join("missing"))
        .arg("--bc")
        .arg(&bc)
        .arg("--report")
        .arg(dir.path().join("r.json"))
        .arg("--history-csv")
        .arg(dir.path().join("h.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(Category::InputError.exit_code()));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["category"], "input-error");
    assert_eq!(err["status"], "error");
    assert_eq!(listing(dir.path()), vec![bc]);
}

#[test]
fn binary_flags_drive_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let ProblemSource::Mesh { path, bc, .. } = strip_problem(dir.path()) else {
        unreachable!()
    };
    let report = dir.path().join("r.json");
    let out = Command::new(BIN)
        .args(["run", "--solver", "pcg-vasmg", "--threshold", "6", "--pre-sweeps", "2", "--post-sweeps", "2"])
        .args(["--tol", "1e-8", "--paper-literal-weights", "--mesh"])
        .arg(&path)
        .arg("--bc")
        .arg(&bc)
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_valid(&json);
    assert_eq!(json["config"]["threshold"], 6);
    assert_eq!(json["config"]["pre_sweeps"], 2);
    assert_eq!(json["config"]["weights"], "paper-literal");
    assert!(json["result"]["final_rel_res"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn binary_signals_non_convergence_but_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let ProblemSource::Mesh { path, bc, .. } = strip_problem(dir.path()) else {
        unreachable!()
    };
    let report = dir.path().join("r.json");
    let out = Command::new(BIN)
        .args(["run", "--solver", "gs", "--max-iters", "3", "--mesh"])
        .arg(&path)
        .arg("--bc")
        .arg(&bc)
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(Category::NotConverged.exit_code()));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["category"], "not-converged");
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["result"]["converged"], false);
}

#[test]
fn binary_rejects_bad_usage() {
    let out = Command::new(BIN).args(["compare", "--generate", "hole-plate", "--solver", "pcg-plain"]).output().unwrap();
    assert_eq!(out.status.code(), Some(Category::ConfigError.exit_code()));
    let out = Command::new(BIN).args(["run", "--generate", "no-such-shape"]).output().unwrap();
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["category"], "config-error");
    let out = Command::new(BIN).args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(Category::ConfigError.exit_code()));
}
