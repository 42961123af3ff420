//! Problem sources: a mesh file with a boundary spec, a generated benchmark
//! geometry, or a raw Matrix Market system.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vasmg::elasticity::{assemble, ProblemSpec};
use vasmg::mesh::{generate_mesh, read_mesh, Mesh, MeshFormat, MeshKind, Point};
use vasmg::sparse::matrix_market::{format_matrix_market, format_vector, parse_vector, read_matrix_market, MmSymmetry};
use vasmg::sparse::CsrMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Mesh {
        path: PathBuf,
        format: MeshFormat,
        /// Boundary spec file; required.
        bc: PathBuf,
    },
    Generate {
        kind: MeshKind,
        refinement: u32,
        /// Replaces the geometry's built-in loading.
        bc: Option<PathBuf>,
    },
    Matrix {
        matrix: PathBuf,
        /// Right-hand side; `A * ones` when absent.
        rhs: Option<PathBuf>,
        /// One vertex per line; the unknowns are ordered component-major.
        coords: Option<PathBuf>,
    },
}

impl ProblemSource {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Mesh { .. } => "mesh",
            Self::Generate { .. } => "generate",
            Self::Matrix { .. } => "matrix",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Mesh { path, .. } => path.display().to_string(),
            Self::Generate { kind, refinement, .. } => format!("{} r{refinement}", kind.name()),
            Self::Matrix { matrix, .. } => matrix.display().to_string(),
        }
    }
}

/// Material overrides applied after the boundary spec is read.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaterialOverride {
    pub youngs_modulus: Option<f64>,
    pub poisson_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub a: CsrMatrix,
    pub f: Vec<f64>,
    pub constrained: Vec<bool>,
    pub points: Option<Vec<Point>>,
    pub dim: usize,
    pub num_vertices: Option<usize>,
}

impl Problem {
    pub fn unknowns(&self) -> usize {
        self.f.len()
    }

    /// Writes `stem.mtx`, `stem.rhs` and, with coordinates, `stem.coords`.
    pub fn export_files(&self, stem: &Path) -> Vec<(PathBuf, String)> {
        let with = |ext: &str| {
            let mut s = stem.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        let mut out = vec![
            (with(".mtx"), format_matrix_market(&self.a, MmSymmetry::General)),
            (with(".rhs"), format_vector(&self.f)),
        ];
        if let Some(points) = &self.points {
            let mut s = String::new();
            for p in points {
                let cs: Vec<String> = p[..self.dim].iter().map(|c| format!("{c:e}")).collect();
                let _ = writeln!(s, "{}", cs.join(" "));
            }
            out.push((with(".coords"), s));
        }
        out
    }
}

fn read_spec(path: &Path) -> CliResult<ProblemSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    ProblemSpec::parse(&text).map_err(|e| CliError::reading(&path.display().to_string(), e))
}

fn from_mesh(mesh: Mesh, mut spec: ProblemSpec, overrides: MaterialOverride) -> CliResult<Problem> {
    if let Some(e) = overrides.youngs_modulus {
        spec.youngs_modulus = e;
    }
    if let Some(nu) = overrides.poisson_ratio {
        spec.poisson_ratio = nu;
    }
    let dim = mesh.dim();
    let mat = spec.material(dim)?;
    let sys = assemble(&mesh, &mat, &spec.bc)?;
    Ok(Problem {
        a: sys.a,
        f: sys.f,
        constrained: sys.constrained,
        points: Some(mesh.vertices().to_vec()),
        dim,
        num_vertices: Some(mesh.num_vertices()),
    })
}

/// Whitespace-separated coordinates, one vertex per line; `#` starts a comment.
pub fn parse_coords(text: &str) -> CliResult<(Vec<Point>, usize)> {
    let mut points = Vec::new();
    let mut dim = 0;
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cs: Vec<f64> = body
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::input(format!("coordinates line {}: {e}", i + 1)))?;
        if dim == 0 {
            dim = cs.len();
        }
        if cs.len() != dim || !(2..=3).contains(&dim) {
            return Err(CliError::input(format!(
                "coordinates line {}: expected {} values, found {}",
                i + 1,
                if dim == 0 { 2 } else { dim },
                cs.len()
            )));
        }
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&cs);
        points.push(p);
    }
    if points.is_empty() {
        return Err(CliError::input("coordinate file holds no vertices"));
    }
    Ok((points, dim))
}

/// Rows holding only a unit diagonal are taken as eliminated Dirichlet DOFs.
fn unit_rows(a: &CsrMatrix) -> Vec<bool> {
    (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| if j == i { v == 1.0 } else { v == 0.0 }) && a.get(i, i) == 1.0
        })
        .collect()
}

fn from_matrix(matrix: &Path, rhs: Option<&Path>, coords: Option<&Path>) -> CliResult<Problem> {
    let a = read_matrix_market(matrix).map_err(|e| CliError::reading(&matrix.display().to_string(), e))?;
    if !a.is_square() {
        return Err(CliError::input(format!("{}: matrix is {}x{}, not square", matrix.display(), a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    let f = match rhs {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            parse_vector(&text).map_err(|e| CliError::reading(&p.display().to_string(), e))?
        }
        None => a.spmv(&vec![1.0; n])?,
    };
    if f.len() != n {
        return Err(CliError::input(format!("right-hand side has {} entries, matrix order is {n}", f.len())));
    }
    let (points, dim) = match coords {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            let (pts, dim) = parse_coords(&text)?;
            if n % pts.len() != 0 || !(1..=dim).contains(&(n / pts.len())) {
                return Err(CliError::input(format!(
                    "{} vertices do not divide {n} unknowns into 1..={dim} components",
                    pts.len()
                )));
            }
            (Some(pts), dim)
        }
        None => (None, 0),
    };
    Ok(Problem {
        constrained: unit_rows(&a),
        num_vertices: points.as_ref().map(Vec::len),
        a,
        f,
        points,
        dim,
    })
}

pub fn load(source: &ProblemSource, overrides: MaterialOverride) -> CliResult<Problem> {
    match source {
        ProblemSource::Mesh { path, format, bc } => {
            let mesh = read_mesh(path, *format).map_err(|e| CliError::reading(&path.display().to_string(), e))?;
            from_mesh(mesh, read_spec(bc)?, overrides)
        }
        ProblemSource::Generate { kind, refinement, bc } => {
            let mesh = generate_mesh(*kind, *refinement)?;
            let spec = match bc {
                Some(p) => read_spec(p)?,
                None => ProblemSpec::for_kind(*kind),
            };
            from_mesh(mesh, spec, overrides)
        }
        ProblemSource::Matrix { matrix, rhs, coords } => {
            if overrides != MaterialOverride::default() {
                return Err(CliError::config("material options need a mesh or generated problem"));
            }
            from_matrix(matrix, rhs.as_deref(), coords.as_deref())
        }
    }
}
