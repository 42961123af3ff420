//! Grid transfer: multilinear interpolation from region-tree cells and the
//! Galerkin level hierarchy built from it.

mod hierarchy;

use std::fmt;
use std::str::FromStr;

pub use hierarchy::{Hierarchy, HierarchyConfig, Level};

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::region_tree::{selectors, CoarseLevel, RegionTree};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Hat functions: per axis `xi` toward the high corner, `1 - xi` toward the low one.
    #[default]
    Multilinear,
    /// Per axis `|x_corner - x| / (high - low)`. Vanishes at a coincident
    /// corner, so it does not interpolate; kept for comparison only.
    PaperLiteral,
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Multilinear => "multilinear",
            WeightScheme::PaperLiteral => "paper-literal",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multilinear" => Ok(Self::Multilinear),
            "paper-literal" => Ok(Self::PaperLiteral),
            _ => Err(Error::InvalidArgument(format!("unknown weight scheme '{s}'"))),
        }
    }
}

/// Interpolation weights of `p` against the `2^dim` corners of a cell, in
/// corner order.
pub fn scalar_weights(
    bounds: &[[f64; 2]; 3],
    dim: usize,
    p: &Point,
    scheme: WeightScheme,
) -> Result<Vec<f64>> {
    let mut xi = [0.0; 3];
    for a in 0..dim {
        let [lo, hi] = bounds[a];
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!("degenerate cell side [{lo}, {hi}]")));
        }
        if p[a] < lo || p[a] > hi {
            return Err(Error::OutsideRegion(format!(
                "coordinate {} of axis {a} outside [{lo}, {hi}]",
                p[a]
            )));
        }
        xi[a] = (p[a] - lo) / (hi - lo);
    }
    Ok(selectors(dim)
        .iter()
        .map(|s| {
            (0..dim)
                .map(|a| match (scheme, s[a]) {
                    (WeightScheme::Multilinear, 1) => xi[a],
                    (WeightScheme::Multilinear, _) => 1.0 - xi[a],
                    (WeightScheme::PaperLiteral, 1) => 1.0 - xi[a],
                    (WeightScheme::PaperLiteral, _) => xi[a],
                })
                .product()
        })
        .collect())
}

/// Prolongation of one scalar field plus its replication over `blocks` components.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    p: CsrMatrix,
    fine_count: usize,
    coarse_count: usize,
    blocks: usize,
}

impl TransferOperator {
    /// Block-diagonal `diag(S, ..., S)` with `blocks` copies of the scalar operator.
    pub fn from_scalar(scalar: &CsrMatrix, blocks: usize) -> Self {
        let (nf, nc) = (scalar.nrows(), scalar.ncols());
        let mut offsets = Vec::with_capacity(blocks * nf + 1);
        let mut cols = Vec::with_capacity(blocks * scalar.nnz());
        let mut vals = Vec::with_capacity(blocks * scalar.nnz());
        offsets.push(0);
        for b in 0..blocks {
            for k in 0..nf {
                let (c, v) = scalar.row(k);
                cols.extend(c.iter().map(|&l| l + b * nc));
                vals.extend_from_slice(v);
                offsets.push(cols.len());
            }
        }
        let p = CsrMatrix::try_new(blocks * nf, blocks * nc, offsets, cols, vals)
            .expect("replicated rows stay sorted");
        Self {
            p,
            fine_count: nf,
            coarse_count: nc,
            blocks,
        }
    }

    pub(crate) fn with_matrix(&self, p: CsrMatrix) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.p
    }

    /// `R = P^T`.
    pub fn restriction(&self) -> CsrMatrix {
        self.p.transpose()
    }

    pub fn fine_count(&self) -> usize {
        self.fine_count
    }

    pub fn coarse_count(&self) -> usize {
        self.coarse_count
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }
}

fn weight_row(
    tree: &RegionTree,
    coarse: &CoarseLevel,
    cell: usize,
    p: &Point,
    scheme: WeightScheme,
    row: &mut Vec<(usize, f64)>,
) -> Result<()> {
    let c = &coarse.cells()[cell];
    let w = scalar_weights(&tree.cell_bounds(c), tree.dim(), p, scheme)?;
    row.clear();
    for (&v, &wv) in c.corners.iter().zip(&w) {
        if wv != 0.0 {
            row.push((v, wv));
        }
    }
    row.sort_unstable_by_key(|e| e.0);
    Ok(())
}

fn rows_to_csr(nrows: usize, ncols: usize, rows: impl Iterator<Item = Result<Vec<(usize, f64)>>>) -> Result<CsrMatrix> {
    let mut offsets = Vec::with_capacity(nrows + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    offsets.push(0);
    for row in rows {
        for (c, v) in row? {
            cols.push(c);
            vals.push(v);
        }
        offsets.push(cols.len());
    }
    CsrMatrix::try_new(nrows, ncols, offsets, cols, vals)
}

/// Scalar prolongation from the coarse level onto the tree's own points, each
/// interpolated from the coarse cell that contains its leaf.
pub fn prolongation_from_points(
    tree: &RegionTree,
    coarse: &CoarseLevel,
    scheme: WeightScheme,
) -> Result<CsrMatrix> {
    let n = tree.num_points();
    let mut buf = Vec::new();
    rows_to_csr(
        n,
        coarse.num_vertices(),
        (0..n).map(|v| {
            let node = tree.ancestor_at(tree.leaf_of(v), coarse.depth());
            let cell = coarse
                .cell_of_node(node)
                .ok_or_else(|| Error::Hierarchy(format!("fine vertex {v} has no coarse cell")))?;
            weight_row(tree, coarse, cell, &tree.points()[v], scheme, &mut buf)?;
            Ok(buf.clone())
        }),
    )
}

/// Scalar prolongation between two auxiliary levels. A vertex of the finer
/// level is interpolated in the coarser cell that contains the first cell
/// that listed it.
pub fn prolongation_between(
    tree: &RegionTree,
    finer: &CoarseLevel,
    coarser: &CoarseLevel,
    scheme: WeightScheme,
) -> Result<CsrMatrix> {
    if coarser.depth() >= finer.depth() {
        return Err(Error::Hierarchy(format!(
            "level depth {} is not coarser than {}",
            coarser.depth(),
            finer.depth()
        )));
    }
    let mut buf = Vec::new();
    rows_to_csr(
        finer.num_vertices(),
        coarser.num_vertices(),
        (0..finer.num_vertices()).map(|v| {
            let owner = finer.cells()[finer.vertex_cell(v)].node;
            let node = tree.ancestor_at(owner, coarser.depth());
            let cell = coarser
                .cell_of_node(node)
                .ok_or_else(|| Error::Hierarchy(format!("coarse vertex {v} has no coarser cell")))?;
            weight_row(tree, coarser, cell, &finer.vertices()[v], scheme, &mut buf)?;
            Ok(buf.clone())
        }),
    )
}
