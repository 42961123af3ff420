//! P1 linear elasticity: material law, stiffness and load assembly, boundary conditions.
//!
//! DOFs are ordered component-major: the `a`-th displacement component of
//! vertex `i` lives at row `a * N + i`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{distance, Mesh, MeshKind, Point};
use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub lame_mu: f64,
    pub lame_lambda: f64,
}

pub fn make_material(e: f64, nu: f64) -> Result<Material> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidMaterial(format!("Young's modulus must be positive, got {e}")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidMaterial(format!(
            "Poisson ratio must lie in [0, 0.5), got {nu}"
        )));
    }
    Ok(Material {
        youngs_modulus: e,
        poisson_ratio: nu,
        lame_mu: e / (2.0 * (1.0 + nu)),
        lame_lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
    })
}

impl Material {
    /// Effective plane-strain material reproducing a plane-stress state:
    /// `E' = E (1 + 2 nu) / (1 + nu)^2`, `nu' = nu / (1 + nu)`.
    pub fn plane_stress(&self) -> Result<Material> {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        make_material(e * (1.0 + 2.0 * nu) / (1.0 + nu).powi(2), nu / (1.0 + nu))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub tag: String,
    /// Constrained displacement components (0 = x, 1 = y, 2 = z).
    pub axes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Traction {
    pub tag: String,
    /// Force per unit boundary length (2D) or area (3D).
    pub force: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointLoad {
    pub tag: String,
    /// Force applied at every vertex carrying the tag.
    pub force: [f64; 3],
}

/// Homogeneous Dirichlet constraints plus Neumann loads, all keyed by vertex tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryCondition {
    pub dirichlet: Vec<Dirichlet>,
    pub traction: Vec<Traction>,
    pub point_loads: Vec<PointLoad>,
}

impl BoundaryCondition {
    pub fn fix(mut self, tag: &str, axes: &[usize]) -> Self {
        self.dirichlet.push(Dirichlet {
            tag: tag.into(),
            axes: axes.to_vec(),
        });
        self
    }

    pub fn traction(mut self, tag: &str, force: [f64; 3]) -> Self {
        self.traction.push(Traction {
            tag: tag.into(),
            force,
        });
        self
    }

    pub fn point_load(mut self, tag: &str, force: [f64; 3]) -> Self {
        self.point_loads.push(PointLoad {
            tag: tag.into(),
            force,
        });
        self
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        let d = mesh.dim();
        let tags = self
            .dirichlet
            .iter()
            .map(|c| &c.tag)
            .chain(self.traction.iter().map(|t| &t.tag))
            .chain(self.point_loads.iter().map(|p| &p.tag));
        for tag in tags {
            if !mesh.has_tag(tag) {
                return Err(Error::InvalidBoundary(format!("mesh has no tag '{tag}'")));
            }
        }
        for c in &self.dirichlet {
            if c.axes.is_empty() || c.axes.iter().any(|&a| a >= d) {
                return Err(Error::InvalidBoundary(format!(
                    "constraint on '{}' has invalid axes {:?} for dimension {d}",
                    c.tag, c.axes
                )));
            }
        }
        let forces = self
            .traction
            .iter()
            .map(|t| &t.force)
            .chain(self.point_loads.iter().map(|p| &p.force));
        for f in forces {
            if f.iter().any(|v| !v.is_finite()) || (d == 2 && f[2] != 0.0) {
                return Err(Error::InvalidBoundary(format!("bad force vector {f:?}")));
            }
        }
        Ok(())
    }
}

/// Material and boundary conditions for one problem, as read from a spec file.
///
/// Line-oriented text, `#` starts a comment:
///
/// ```text
/// material 2.1e5 0.3
/// plane-stress
/// fix left x
/// fix base xyz
/// traction right 10 0
/// point-load tip 0 -1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub plane_stress: bool,
    pub bc: BoundaryCondition,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            youngs_modulus: 2.1e5,
            poisson_ratio: 0.3,
            plane_stress: false,
            bc: BoundaryCondition::default(),
        }
    }
}

fn parse_axes(line: usize, s: &str) -> Result<Vec<usize>> {
    let mut axes = Vec::new();
    for ch in s.chars() {
        let a = match ch {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("bad axis list '{s}' (use letters x, y, z)"),
                })
            }
        };
        if !axes.contains(&a) {
            axes.push(a);
        }
    }
    Ok(axes)
}

fn parse_force(line: usize, fields: &[&str]) -> Result<[f64; 3]> {
    if fields.len() < 2 || fields.len() > 3 {
        return Err(Error::Parse {
            line,
            msg: "force needs 2 or 3 components".into(),
        });
    }
    let mut f = [0.0; 3];
    for (k, s) in fields.iter().enumerate() {
        f[k] = s.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad force component '{s}'"),
        })?;
    }
    Ok(f)
}

impl ProblemSpec {
    /// The loading of each generated benchmark geometry.
    pub fn for_kind(kind: MeshKind) -> Self {
        let bc = BoundaryCondition::default();
        let (bc, plane_stress) = match kind {
            MeshKind::HolePlate | MeshKind::SquareHolePlate => (
                bc.fix("left", &[0]).fix("bottom", &[1]).traction("right", [10.0, 0.0, 0.0]),
                false,
            ),
            MeshKind::RingQuadrant => (
                bc.fix("left", &[0, 1]).traction("bottom", [0.0, -10.0, 0.0]),
                false,
            ),
            MeshKind::DamTrapezoid => (
                bc.fix("bottom", &[0, 1]).traction("left", [10.0, 0.0, 0.0]),
                true,
            ),
            MeshKind::Box3d => (
                bc.fix("left", &[0, 1, 2]).traction("right", [0.0, 0.0, -10.0]),
                false,
            ),
        };
        Self {
            plane_stress,
            bc,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let f: Vec<&str> = body.split_whitespace().collect();
            let Some((&kw, rest)) = f.split_first() else {
                continue;
            };
            let perr = |msg: &str| Error::Parse {
                line,
                msg: format!("{kw}: {msg}"),
            };
            match kw {
                "material" => {
                    if rest.len() != 2 {
                        return Err(perr("expected 'material <E> <nu>'"));
                    }
                    spec.youngs_modulus = rest[0].parse().map_err(|_| perr("bad E"))?;
                    spec.poisson_ratio = rest[1].parse().map_err(|_| perr("bad nu"))?;
                }
                "plane-stress" => spec.plane_stress = true,
                "plane-strain" => spec.plane_stress = false,
                "fix" => {
                    if rest.len() != 2 {
                        return Err(perr("expected 'fix <tag> <axes>'"));
                    }
                    spec.bc.dirichlet.push(Dirichlet {
                        tag: rest[0].into(),
                        axes: parse_axes(line, rest[1])?,
                    });
                }
                "traction" | "point-load" => {
                    if rest.is_empty() {
                        return Err(perr("missing tag"));
                    }
                    let force = parse_force(line, &rest[1..])?;
                    let tag = rest[0].to_string();
                    if kw == "traction" {
                        spec.bc.traction.push(Traction { tag, force });
                    } else {
                        spec.bc.point_loads.push(PointLoad { tag, force });
                    }
                }
                _ => return Err(perr("unknown keyword")),
            }
        }
        Ok(spec)
    }

    pub fn to_text(&self, dim: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "material {} {}", self.youngs_modulus, self.poisson_ratio);
        if self.plane_stress {
            let _ = writeln!(s, "plane-stress");
        }
        for c in &self.bc.dirichlet {
            let axes: String = c.axes.iter().map(|&a| ['x', 'y', 'z'][a]).collect();
            let _ = writeln!(s, "fix {} {axes}", c.tag);
        }
        let force = |f: &[f64; 3]| f[..dim].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        for t in &self.bc.traction {
            let _ = writeln!(s, "traction {} {}", t.tag, force(&t.force));
        }
        for p in &self.bc.point_loads {
            let _ = writeln!(s, "point-load {} {}", p.tag, force(&p.force));
        }
        s
    }

    /// Material actually used in assembly (plane-stress conversion applied in 2D).
    pub fn material(&self, dim: usize) -> Result<Material> {
        let m = make_material(self.youngs_modulus, self.poisson_ratio)?;
        if self.plane_stress && dim == 2 {
            m.plane_stress()
        } else {
            Ok(m)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub a: CsrMatrix,
    pub f: Vec<f64>,
    pub dim: usize,
    pub num_vertices: usize,
    /// `constrained[a * N + i]` marks a Dirichlet DOF.
    pub constrained: Vec<bool>,
}

impl AssembledSystem {
    pub fn num_dofs(&self) -> usize {
        self.f.len()
    }

    pub fn dof(&self, vertex: usize, axis: usize) -> usize {
        axis * self.num_vertices + vertex
    }

    pub fn num_constrained(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }
}

/// Gradients of the barycentric basis functions of a simplex, and its measure.
pub fn p1_gradients(dim: usize, p: &[Point]) -> Result<(Vec<[f64; 3]>, f64)> {
    let e = |k: usize, a: usize| p[k][a] - p[0][a];
    let mut g = vec![[0.0; 3]; dim + 1];
    let measure;
    if dim == 2 {
        let det = e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0);
        if det == 0.0 {
            return Err(Error::DegenerateElement(0));
        }
        // rows of the inverse of [e1 e2]
        g[1] = [e(2, 1) / det, -e(2, 0) / det, 0.0];
        g[2] = [-e(1, 1) / det, e(1, 0) / det, 0.0];
        measure = det.abs() / 2.0;
    } else {
        let m = [
            [e(1, 0), e(2, 0), e(3, 0)],
            [e(1, 1), e(2, 1), e(3, 1)],
            [e(1, 2), e(2, 2), e(3, 2)],
        ];
        let cof = |r: usize, c: usize| {
            let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
        };
        let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
        if det == 0.0 {
            return Err(Error::DegenerateElement(0));
        }
        // inverse[k][a] = cof(a, k) / det; basis k+1 gradient is row k of the inverse
        for k in 0..3 {
            g[k + 1] = [cof(0, k) / det, cof(1, k) / det, cof(2, k) / det];
        }
        measure = det.abs() / 6.0;
    }
    for a in 0..3 {
        g[0][a] = -(1..=dim).map(|k| g[k][a]).sum::<f64>();
    }
    Ok((g, measure))
}

/// Element stiffness, local index `a * (dim + 1) + i` for component `a` of vertex `i`.
pub fn element_stiffness(dim: usize, p: &[Point], mat: &Material) -> Result<Vec<f64>> {
    let (g, vol) = p1_gradients(dim, p)?;
    let nv = dim + 1;
    let n = dim * nv;
    let (lam, mu) = (mat.lame_lambda, mat.lame_mu);
    let mut k = vec![0.0; n * n];
    for a in 0..dim {
        for i in 0..nv {
            for b in 0..dim {
                for j in 0..nv {
                    let gg: f64 = (0..dim).map(|c| g[i][c] * g[j][c]).sum();
                    let mut v = lam * g[i][a] * g[j][b] + mu * g[i][b] * g[j][a];
                    if a == b {
                        v += mu * gg;
                    }
                    k[(a * nv + i) * n + b * nv + j] = vol * v;
                }
            }
        }
    }
    Ok(k)
}

/// Unconstrained global stiffness matrix.
pub fn stiffness_matrix(mesh: &Mesh, mat: &Material) -> Result<CsrMatrix> {
    let d = mesh.dim();
    let n = mesh.num_vertices();
    let nv = d + 1;
    let mut trip = Vec::with_capacity(mesh.num_elements() * (d * nv).pow(2));
    for (e, el) in mesh.elements().enumerate() {
        let pts: Vec<Point> = el.iter().map(|&v| *mesh.vertex(v)).collect();
        let k = element_stiffness(d, &pts, mat).map_err(|_| Error::DegenerateElement(e))?;
        let m = d * nv;
        for a in 0..d {
            for i in 0..nv {
                let row = a * n + el[i];
                for b in 0..d {
                    for j in 0..nv {
                        trip.push((row, b * n + el[j], k[(a * nv + i) * m + b * nv + j]));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(d * n, d * n, &trip)
}

fn facet_measure(mesh: &Mesh, f: &[usize]) -> f64 {
    let p = |k: usize| mesh.vertex(f[k]);
    if mesh.dim() == 2 {
        distance(p(0), p(1))
    } else {
        let u: Vec<f64> = (0..3).map(|a| p(1)[a] - p(0)[a]).collect();
        let v: Vec<f64> = (0..3).map(|a| p(2)[a] - p(0)[a]).collect();
        let c = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        0.5 * norm2(&c)
    }
}

/// Consistent nodal loads. A boundary facet receives a traction only when
/// all of its vertices carry the tag; its load is split equally over them.
pub fn load_vector(mesh: &Mesh, bc: &BoundaryCondition) -> Result<Vec<f64>> {
    bc.validate(mesh)?;
    let d = mesh.dim();
    let n = mesh.num_vertices();
    let mut f = vec![0.0; d * n];
    if !bc.traction.is_empty() {
        let facets = mesh.boundary_facets();
        for t in &bc.traction {
            let set = &mesh.tags()[&t.tag];
            for facet in facets.iter().filter(|fc| fc.iter().all(|v| set.contains(v))) {
                let share = facet_measure(mesh, facet) / facet.len() as f64;
                for &v in facet {
                    for a in 0..d {
                        f[a * n + v] += t.force[a] * share;
                    }
                }
            }
        }
    }
    for pl in &bc.point_loads {
        for v in mesh.tagged(&pl.tag) {
            for a in 0..d {
                f[a * n + v] += pl.force[a];
            }
        }
    }
    Ok(f)
}

/// Symmetric elimination of prescribed DOFs: the known values are moved to
/// the right-hand side, the rows and columns are replaced by unit vectors,
/// and the right-hand side entries are set to the prescribed values.
pub fn apply_dirichlet(
    a: &CsrMatrix,
    f: &[f64],
    constrained: &[bool],
    values: &[f64],
) -> Result<(CsrMatrix, Vec<f64>)> {
    let n = a.nrows();
    for (op, len) in [("apply_dirichlet (rhs)", f.len()), ("apply_dirichlet (mask)", constrained.len()), ("apply_dirichlet (values)", values.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                op,
                expected: n,
                found: len,
            });
        }
    }
    let lifted: Vec<f64> = (0..n).map(|i| if constrained[i] { values[i] } else { 0.0 }).collect();
    let mut rhs = f.to_vec();
    if lifted.iter().any(|&v| v != 0.0) {
        let al = a.spmv(&lifted)?;
        for i in 0..n {
            rhs[i] -= al[i];
        }
    }
    for i in 0..n {
        if constrained[i] {
            rhs[i] = values[i];
        }
    }
    Ok((a.with_unit_rows_cols(constrained)?, rhs))
}

pub fn assemble(mesh: &Mesh, mat: &Material, bc: &BoundaryCondition) -> Result<AssembledSystem> {
    bc.validate(mesh)?;
    let d = mesh.dim();
    let n = mesh.num_vertices();
    let mut used = vec![false; n];
    for el in mesh.elements() {
        for &v in el {
            used[v] = true;
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::InvalidMesh(format!("vertex {v} belongs to no element")));
    }
    let mut constrained = vec![false; d * n];
    for c in &bc.dirichlet {
        for v in mesh.tagged(&c.tag) {
            for &a in &c.axes {
                constrained[a * n + v] = true;
            }
        }
    }
    if !constrained.iter().any(|&c| c) {
        return Err(Error::NoDirichlet);
    }
    let k = stiffness_matrix(mesh, mat)?;
    let f = load_vector(mesh, bc)?;
    let zeros = vec![0.0; d * n];
    let (a, f) = apply_dirichlet(&k, &f, &constrained, &zeros)?;
    Ok(AssembledSystem {
        a,
        f,
        dim: d,
        num_vertices: n,
        constrained,
    })
}

/// `F - A U`.
pub fn residual(a: &CsrMatrix, f: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if f.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "residual",
            expected: a.nrows(),
            found: f.len(),
        });
    }
    let au = a.spmv(u)?;
    Ok(f.iter().zip(&au).map(|(x, y)| x - y).collect())
}

/// `|F - A U| / |F|`, or the plain residual norm when `F = 0`.
pub fn rel_res(a: &CsrMatrix, f: &[f64], u: &[f64]) -> Result<f64> {
    let r = norm2(&residual(a, f, u)?);
    let nf = norm2(f);
    Ok(if nf > 0.0 { r / nf } else { r })
}
