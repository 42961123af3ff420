//! Deterministic parametric meshes of the benchmark geometries.
//!
//! Every kind is a mapped structured grid (quads split into two triangles with
//! alternating diagonals, or cubes split into six Kuhn tetrahedra). Interior
//! vertices get a small seeded jitter so the vertex cloud is not a lattice.
//! Each refinement halves the cell size, giving about 4x the vertices in 2D.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{distance, signed_measure, Mesh, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshKind {
    /// Quarter of a 20x20 plate with a round hole of radius 1.
    HolePlate,
    /// Quarter annulus, radii 1 and 10.
    RingQuadrant,
    /// Quarter of a 20x20 plate with a 2x2 square hole.
    SquareHolePlate,
    /// Trapezoidal dam cross-section, height 20, base 10, crest 3.
    DamTrapezoid,
    /// Unit cube of tetrahedra.
    Box3d,
}

impl MeshKind {
    pub const ALL: [MeshKind; 5] = [
        MeshKind::HolePlate,
        MeshKind::RingQuadrant,
        MeshKind::SquareHolePlate,
        MeshKind::DamTrapezoid,
        MeshKind::Box3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::HolePlate => "hole-plate",
            MeshKind::RingQuadrant => "ring-quadrant",
            MeshKind::SquareHolePlate => "square-hole-plate",
            MeshKind::DamTrapezoid => "dam-trapezoid",
            MeshKind::Box3d => "box-3d",
        }
    }

    pub fn dim(self) -> usize {
        if self == MeshKind::Box3d {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeshKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MeshKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown mesh kind '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

const MAX_REFINEMENT: u32 = 8;
const JITTER: f64 = 0.12;

pub fn generate_mesh(kind: MeshKind, refinement: u32) -> Result<Mesh> {
    if refinement > MAX_REFINEMENT {
        return Err(Error::InvalidArgument(format!(
            "refinement {refinement} exceeds the supported maximum {MAX_REFINEMENT}"
        )));
    }
    let s = 1usize << refinement;
    let seed = 0x5eed_0000 + 64 * kind as u64 + refinement as u64;
    let (vertices, elements, tags) = match kind {
        MeshKind::SquareHolePlate => square_hole_plate(s),
        MeshKind::HolePlate => hole_plate(s),
        MeshKind::RingQuadrant => ring_quadrant(s),
        MeshKind::DamTrapezoid => dam(s),
        MeshKind::Box3d => {
            let n = 11 * s;
            let g = Grid3::new(n, n, n, [1.0; 3]);
            (g.vertices, g.elements, g.tags)
        }
    };
    let vertices = jitter(kind.dim(), vertices, &elements, &tags, seed);
    Mesh::new(kind.dim(), vertices, elements, tags)
}

/// Uniform `nx` by `ny` triangulated rectangle `[0,width] x [0,height]` with
/// tags `left`, `right`, `bottom`, `top`.
pub fn rectangle_mesh(nx: usize, ny: usize, width: f64, height: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(width > 0.0) || !(height > 0.0) {
        return Err(Error::InvalidArgument("rectangle needs positive sizes".into()));
    }
    let (v, e, t) = grid2(
        nx,
        ny,
        |i, j| [width * i as f64 / nx as f64, height * j as f64 / ny as f64, 0.0],
        |_, _| true,
        |i, j| side_tags(i, j, nx, ny, ["left", "right", "bottom", "top"]),
    );
    Mesh::new(2, v, e, t)
}

/// Uniform tetrahedral box `[0,lx] x [0,ly] x [0,lz]` with tags `left`/`right`
/// (x), `front`/`back` (y), `bottom`/`top` (z).
pub fn box_mesh(nx: usize, ny: usize, nz: usize, size: [f64; 3]) -> Result<Mesh> {
    if nx == 0 || ny == 0 || nz == 0 || size.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("box needs positive sizes".into()));
    }
    let g = Grid3::new(nx, ny, nz, size);
    Mesh::new(3, g.vertices, g.elements, g.tags)
}

type Parts = (Vec<Point>, Vec<Vec<usize>>, BTreeMap<String, BTreeSet<usize>>);

fn side_tags(i: usize, j: usize, nx: usize, ny: usize, names: [&'static str; 4]) -> Vec<&'static str> {
    let mut t = Vec::new();
    if i == 0 {
        t.push(names[0]);
    }
    if i == nx {
        t.push(names[1]);
    }
    if j == 0 {
        t.push(names[2]);
    }
    if j == ny {
        t.push(names[3]);
    }
    t
}

/// Mapped `nx` by `ny` grid; `keep(i, j)` selects cells by their lower-left index.
fn grid2(
    nx: usize,
    ny: usize,
    map: impl Fn(usize, usize) -> Point,
    keep: impl Fn(usize, usize) -> bool,
    tags_at: impl Fn(usize, usize) -> Vec<&'static str>,
) -> Parts {
    let mut id = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut elements = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point>| {
        let k = j * (nx + 1) + i;
        if id[k] == usize::MAX {
            id[k] = vertices.len();
            vertices.push(map(i, j));
            for t in tags_at(i, j) {
                tags.entry(t.to_string()).or_default().insert(id[k]);
            }
        }
        id[k]
    };
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let a = vid(i, j, &mut vertices);
            let b = vid(i + 1, j, &mut vertices);
            let c = vid(i + 1, j + 1, &mut vertices);
            let d = vid(i, j + 1, &mut vertices);
            if (i + j) % 2 == 0 {
                elements.push(vec![a, b, c]);
                elements.push(vec![a, c, d]);
            } else {
                elements.push(vec![a, b, d]);
                elements.push(vec![b, c, d]);
            }
        }
    }
    (vertices, elements, tags)
}

/// Geometric grading of `t` in `[0,1]`: `(e^(beta t) - 1) / (e^beta - 1)`.
fn graded(t: f64, beta: f64) -> f64 {
    (beta * t).exp_m1() / beta.exp_m1()
}

fn square_hole_plate(s: usize) -> Parts {
    // 6s uniform cells across the hole, 30s graded cells from the hole to the edge
    let (nh, ng) = (6 * s, 30 * s);
    let n = nh + ng;
    let beta = 3f64.ln();
    let coord = |i: usize| {
        if i <= nh {
            i as f64 / nh as f64
        } else {
            1.0 + 9.0 * graded((i - nh) as f64 / ng as f64, beta)
        }
    };
    grid2(
        n,
        n,
        |i, j| [coord(i), coord(j), 0.0],
        |i, j| i >= nh || j >= nh,
        |i, j| {
            let mut t = side_tags(i, j, n, n, ["left", "right", "bottom", "top"]);
            if (i == nh && j <= nh) || (j == nh && i <= nh) {
                t.push("inner");
            }
            t
        },
    )
}

fn hole_plate(s: usize) -> Parts {
    let (na, nr) = (40 * s, 32 * s);
    let beta = 13f64.ln();
    grid2(
        nr,
        na,
        |i, j| {
            let theta = FRAC_PI_2 * j as f64 / na as f64;
            let (sn, cs) = theta.sin_cos();
            // outer point on the ray: right edge below the diagonal, top edge above
            let outer = if 2 * j <= na {
                [10.0, 10.0 * sn / cs]
            } else {
                [10.0 * cs / sn, 10.0]
            };
            let g = graded(i as f64 / nr as f64, beta);
            let mut p = [cs + g * (outer[0] - cs), sn + g * (outer[1] - sn), 0.0];
            if j == na {
                p[0] = 0.0;
            }
            if j == 0 {
                p[1] = 0.0;
            }
            p
        },
        |_, _| true,
        |i, j| {
            let mut t = Vec::new();
            if i == 0 {
                t.push("inner");
            }
            if i == nr {
                if 2 * j <= na {
                    t.push("right");
                }
                if 2 * j >= na {
                    t.push("top");
                }
            }
            if j == 0 {
                t.push("bottom");
            }
            if j == na {
                t.push("left");
            }
            t
        },
    )
}

fn ring_quadrant(s: usize) -> Parts {
    let (na, nr) = (28 * s, 41 * s);
    grid2(
        nr,
        na,
        |i, j| {
            let r = 10f64.powf(i as f64 / nr as f64);
            let theta = FRAC_PI_2 * j as f64 / na as f64;
            let mut p = [r * theta.cos(), r * theta.sin(), 0.0];
            if j == na {
                p[0] = 0.0;
            }
            if j == 0 {
                p[1] = 0.0;
            }
            p
        },
        |_, _| true,
        |i, j| side_tags(i, j, nr, na, ["inner", "outer", "bottom", "left"]),
    )
}

fn dam(s: usize) -> Parts {
    let (nx, ny) = (24 * s, 48 * s);
    grid2(
        nx,
        ny,
        |i, j| {
            let y = 20.0 * j as f64 / ny as f64;
            let width = 10.0 - 7.0 * y / 20.0;
            [width * i as f64 / nx as f64, y, 0.0]
        },
        |_, _| true,
        |i, j| side_tags(i, j, nx, ny, ["left", "right", "bottom", "top"]),
    )
}

struct Grid3 {
    vertices: Vec<Point>,
    elements: Vec<Vec<usize>>,
    tags: BTreeMap<String, BTreeSet<usize>>,
}

impl Grid3 {
    fn new(nx: usize, ny: usize, nz: usize, size: [f64; 3]) -> Self {
        let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        let mut tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    let v = vertices.len();
                    vertices.push([
                        size[0] * i as f64 / nx as f64,
                        size[1] * j as f64 / ny as f64,
                        size[2] * k as f64 / nz as f64,
                    ]);
                    for (hit, name) in [
                        (i == 0, "left"),
                        (i == nx, "right"),
                        (j == 0, "front"),
                        (j == ny, "back"),
                        (k == 0, "bottom"),
                        (k == nz, "top"),
                    ] {
                        if hit {
                            tags.entry(name.to_string()).or_default().insert(v);
                        }
                    }
                }
            }
        }
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut elements = Vec::with_capacity(6 * nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let mut tet = vec![id(c[0], c[1], c[2])];
                        for axis in perm {
                            c[axis] += 1;
                            tet.push(id(c[0], c[1], c[2]));
                        }
                        elements.push(tet);
                    }
                }
            }
        }
        Self {
            vertices,
            elements,
            tags,
        }
    }
}

/// Moves untagged vertices by up to `JITTER` times their shortest incident
/// edge, halving the amplitude until no element changes orientation.
fn jitter(
    dim: usize,
    vertices: Vec<Point>,
    elements: &[Vec<usize>],
    tags: &BTreeMap<String, BTreeSet<usize>>,
    seed: u64,
) -> Vec<Point> {
    let n = vertices.len();
    let mut fixed = vec![false; n];
    for set in tags.values() {
        for &v in set {
            fixed[v] = true;
        }
    }
    let mut shortest = vec![f64::INFINITY; n];
    for el in elements {
        for a in 0..el.len() {
            for b in a + 1..el.len() {
                let d = distance(&vertices[el[a]], &vertices[el[b]]);
                shortest[el[a]] = shortest[el[a]].min(d);
                shortest[el[b]] = shortest[el[b]].min(d);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<Point> = (0..n)
        .map(|_| {
            let mut o = [0.0; 3];
            for c in o.iter_mut().take(dim) {
                *c = rng.gen_range(-1.0..1.0);
            }
            o
        })
        .collect();
    let mut amplitude = JITTER;
    loop {
        let moved: Vec<Point> = vertices
            .iter()
            .enumerate()
            .map(|(v, p)| {
                if fixed[v] || !shortest[v].is_finite() {
                    return *p;
                }
                let scale = amplitude * shortest[v] / (dim as f64).sqrt();
                [p[0] + scale * offsets[v][0], p[1] + scale * offsets[v][1], p[2] + scale * offsets[v][2]]
            })
            .collect();
        let ok = elements.iter().all(|el| {
            let before = signed_measure(dim, &vertices, el);
            let after = signed_measure(dim, &moved, el);
            before * after > 0.0 && after.abs() > 0.25 * before.abs()
        });
        if ok {
            return moved;
        }
        amplitude *= 0.5;
        if amplitude < 1e-6 {
            return vertices;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_tags(m: &Mesh, dirichlet: &[&str]) {
        let boundary = m.boundary_vertices();
        for &v in &boundary {
            assert!(!m.tags_of(v).is_empty(), "boundary vertex {v} untagged");
        }
        for t in dirichlet {
            for v in m.tagged(t) {
                assert!(boundary.contains(&v), "interior vertex {v} tagged {t}");
            }
        }
    }

    #[test]
    fn square_hole_plate_coarse() {
        let m = generate_mesh(MeshKind::SquareHolePlate, 0).unwrap();
        assert_eq!(m.num_vertices(), 37 * 37 - 36);
        for e in 0..m.num_elements() {
            assert!(m.element_measure(e) > 0.0);
        }
        check_tags(&m, &["left", "bottom", "inner", "right", "top"]);
        for t in ["left", "bottom", "right", "top", "inner"] {
            assert!(m.has_tag(t));
        }
    }

    #[test]
    fn all_kinds_tagged_and_valid() {
        for kind in MeshKind::ALL {
            let m = generate_mesh(kind, 0).unwrap();
            assert_eq!(m.dim(), kind.dim());
            let all_tags: Vec<&str> = m.tags().keys().map(|s| s.as_str()).collect();
            check_tags(&m, &all_tags);
        }
    }

    #[test]
    fn refinement_quadruples_vertices() {
        for kind in [MeshKind::RingQuadrant, MeshKind::HolePlate, MeshKind::DamTrapezoid] {
            let a = generate_mesh(kind, 0).unwrap().num_vertices() as f64;
            let b = generate_mesh(kind, 1).unwrap().num_vertices() as f64;
            assert!((3.0..=6.0).contains(&(b / a)), "{kind}: {a} -> {b}");
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_mesh(MeshKind::HolePlate, 1).unwrap();
        let b = generate_mesh(MeshKind::HolePlate, 1).unwrap();
        assert_eq!(a, b);
        assert!("nope".parse::<MeshKind>().is_err());
        assert_eq!("dam-trapezoid".parse::<MeshKind>().unwrap(), MeshKind::DamTrapezoid);
    }

    #[test]
    fn jitter_keeps_boundary_in_place() {
        let m = generate_mesh(MeshKind::SquareHolePlate, 0).unwrap();
        for v in m.tagged("left") {
            assert_eq!(m.vertex(v)[0], 0.0);
        }
        for v in m.tagged("inner") {
            let p = m.vertex(v);
            assert!(p[0] == 1.0 || p[1] == 1.0);
        }
    }

    #[test]
    fn helpers() {
        let r = rectangle_mesh(2, 3, 2.0, 3.0).unwrap();
        assert_eq!((r.num_vertices(), r.num_elements()), (12, 12));
        let b = box_mesh(2, 2, 2, [1.0; 3]).unwrap();
        assert_eq!((b.num_vertices(), b.num_elements()), (27, 48));
        let vol: f64 = (0..b.num_elements()).map(|e| b.element_measure(e)).sum();
        assert!((vol - 1.0).abs() < 1e-14);
        assert_eq!(b.boundary_vertices().len(), 26);
    }
}
