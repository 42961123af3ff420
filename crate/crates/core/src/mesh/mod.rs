//! Unstructured simplex meshes: triangles in 2D, tetrahedra in 3D.

mod generate;
mod io;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use generate::{box_mesh, generate_mesh, rectangle_mesh, MeshKind};
pub use io::{
    parse_gmsh_v2, parse_node_ele, read_mesh, read_node_ele, write_node_ele, format_node_ele,
    MeshFormat,
};
pub use stats::{point_stats, MeshStats};

use crate::error::{Error, Result};

/// Vertex coordinates; the z component is zero for planar meshes.
pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    tags: BTreeMap<String, BTreeSet<usize>>,
}

impl Mesh {
    /// Validates connectivity and flips negatively oriented simplices.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        elements: Vec<Vec<usize>>,
        tags: BTreeMap<String, BTreeSet<usize>>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let n = vertices.len();
        if n < dim + 1 {
            return Err(Error::InvalidMesh(format!(
                "{n} vertices, need at least {}",
                dim + 1
            )));
        }
        if elements.is_empty() {
            return Err(Error::InvalidMesh("no elements".into()));
        }
        if let Some(k) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {k} has non-finite coordinates")));
        }
        let mut vertices = vertices;
        if dim == 2 {
            for p in &mut vertices {
                p[2] = 0.0;
            }
        }
        let npe = dim + 1;
        let mut cells = Vec::with_capacity(elements.len() * npe);
        for (e, el) in elements.iter().enumerate() {
            if el.len() != npe {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has {} vertices, expected {npe}",
                    el.len()
                )));
            }
            for (a, &v) in el.iter().enumerate() {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "element {e} references vertex {v} >= {n}"
                    )));
                }
                if el[..a].contains(&v) {
                    return Err(Error::InvalidMesh(format!(
                        "element {e} repeats vertex {v}"
                    )));
                }
            }
            let mut el = el.clone();
            let m = signed_measure(dim, &vertices, &el);
            let scale = max_edge(&vertices, &el).powi(dim as i32);
            if m.abs() <= 1e-13 * scale {
                return Err(Error::DegenerateElement(e));
            }
            if m < 0.0 {
                el.swap(dim - 1, dim);
            }
            cells.extend_from_slice(&el);
        }
        for (tag, set) in &tags {
            if let Some(&v) = set.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "tag '{tag}' references vertex {v} >= {n}"
                )));
            }
        }
        Ok(Self {
            dim,
            vertices,
            cells,
            tags,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point {
        &self.vertices[i]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.dim + 1;
        &self.cells[e * npe..(e + 1) * npe]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.chunks_exact(self.dim + 1)
    }

    pub fn tags(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.tags
    }

    /// Vertices carrying `tag`, empty when the tag is unknown.
    pub fn tagged(&self, tag: &str) -> impl Iterator<Item = usize> + '_ {
        self.tags.get(tag).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains_key(tag)
    }

    pub fn tags_of(&self, v: usize) -> Vec<&str> {
        self.tags
            .iter()
            .filter(|(_, s)| s.contains(&v))
            .map(|(t, _)| t.as_str())
            .collect()
    }

    /// Positive measure (area or volume) of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        signed_measure(self.dim, &self.vertices, self.element(e))
    }

    /// Facets (edges in 2D, triangles in 3D) that belong to exactly one element,
    /// in first-seen order.
    pub fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let npe = self.dim + 1;
        let mut count: HashMap<Vec<usize>, (usize, usize, usize)> = HashMap::new();
        let mut order = 0usize;
        for (e, el) in self.elements().enumerate() {
            for skip in 0..npe {
                let mut f: Vec<usize> = (0..npe).filter(|&a| a != skip).map(|a| el[a]).collect();
                f.sort_unstable();
                let entry = count.entry(f).or_insert_with(|| {
                    order += 1;
                    (0, order, e)
                });
                entry.0 += 1;
            }
        }
        let mut faces: Vec<(usize, Vec<usize>)> = count
            .into_iter()
            .filter(|(_, (c, _, _))| *c == 1)
            .map(|(f, (_, o, _))| (o, f))
            .collect();
        faces.sort_unstable_by_key(|(o, _)| *o);
        faces.into_iter().map(|(_, f)| f).collect()
    }

    pub fn boundary_vertices(&self) -> BTreeSet<usize> {
        self.boundary_facets().into_iter().flatten().collect()
    }

    pub fn stats(&self) -> Result<MeshStats> {
        point_stats(&self.vertices)
    }
}

pub(crate) fn signed_measure(dim: usize, v: &[Point], el: &[usize]) -> f64 {
    let p0 = v[el[0]];
    let d = |k: usize, a: usize| v[el[k]][a] - p0[a];
    if dim == 2 {
        0.5 * (d(1, 0) * d(2, 1) - d(1, 1) * d(2, 0))
    } else {
        let det = d(1, 0) * (d(2, 1) * d(3, 2) - d(2, 2) * d(3, 1))
            - d(1, 1) * (d(2, 0) * d(3, 2) - d(2, 2) * d(3, 0))
            + d(1, 2) * (d(2, 0) * d(3, 1) - d(2, 1) * d(3, 0));
        det / 6.0
    }
}

fn max_edge(v: &[Point], el: &[usize]) -> f64 {
    let mut m: f64 = 0.0;
    for a in 0..el.len() {
        for b in a + 1..el.len() {
            m = m.max(distance(&v[el[a]], &v[el[b]]));
        }
    }
    m
}

#[inline]
pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
