//! Galerkin level hierarchy `A_{l+1} = P_l^T A_l P_l` over region-tree levels.

use std::time::Instant;

use super::{prolongation_between, prolongation_from_points, TransferOperator, WeightScheme};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::region_tree::RegionTree;
use crate::sparse::{dependent_columns, triple_product, Cholesky, CsrMatrix, DenseMatrix};

/// Relative pivot below which a column of `P` counts as spanned by the others.
const DEPENDENCE_TOL: f64 = 1e-6;

/// Graph distance searched for the kept columns spanning a masked one.
const FOLD_RINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyConfig {
    /// Region-tree split threshold; `None` picks 4 in 2D and 8 in 3D.
    pub threshold: Option<usize>,
    /// The first level with at most this many DOFs is solved densely.
    pub coarsest_cap: usize,
    pub weights: WeightScheme,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            coarsest_cap: 5000,
            weights: WeightScheme::Multilinear,
        }
    }
}

impl HierarchyConfig {
    pub fn threshold_for(&self, dim: usize) -> usize {
        self.threshold.unwrap_or(if dim == 2 { 4 } else { 8 })
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    pub a: CsrMatrix,
    /// DOFs excluded from coarse correction, with unit rows and columns:
    /// Dirichlet DOFs on the fine level; on auxiliary levels, coarse DOFs whose
    /// prolongation column is empty or a combination of the other columns.
    /// Dropping the latter leaves the range of `P` unchanged and keeps
    /// `P^T A P` definite.
    pub masked: Vec<bool>,
    /// Region-tree depth of an auxiliary level; `None` for the fine level.
    pub depth: Option<u32>,
    /// Wall time spent building this level's transfer and Galerkin operator.
    pub setup_seconds: f64,
}

impl Level {
    pub fn num_dofs(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<Level>,
    transfers: Vec<TransferOperator>,
    coarsest: Cholesky,
}

fn check_level(level: usize, a: &CsrMatrix, masked: &[bool]) -> Result<()> {
    if !a.is_symmetric(1e-12) {
        return Err(Error::CoarseNotSpd {
            level,
            source: Box::new(Error::InvalidMatrix(format!(
                "asymmetry {:e} relative to max entry {:e}",
                a.symmetry_defect(),
                a.max_abs()
            ))),
        });
    }
    for (i, d) in a.diagonal().into_iter().enumerate() {
        if !masked[i] && !(d > 0.0) {
            return Err(Error::CoarseNotSpd {
                level,
                source: Box::new(Error::NotSpd { row: i, pivot: d }),
            });
        }
    }
    Ok(())
}

/// `M` with `P M x = P x` for every `x`, up to the dependence tolerance,
/// where the masked columns of `P` are combinations of the kept ones. Row `k`
/// of `M` is `e_k` plus the coefficient of kept column `k` in each masked
/// column; masked rows are empty. The coefficients come from least squares
/// over the kept columns near the masked one in the graph of `gram = P^T P`,
/// widening the neighbourhood until the residual vanishes.
fn fold_matrix(gram: &CsrMatrix, masked: &[bool]) -> Result<CsrMatrix> {
    let n = gram.nrows();
    let mut t: Vec<(usize, usize, f64)> = (0..n).filter(|&k| !masked[k]).map(|k| (k, k, 1.0)).collect();
    let mut seen = vec![false; n];
    for j in (0..n).filter(|&j| masked[j]) {
        let gjj = gram.get(j, j);
        if gjj == 0.0 {
            continue;
        }
        let mut ring = vec![j];
        let mut reached = vec![j];
        seen[j] = true;
        let mut best = None;
        for _ in 0..FOLD_RINGS {
            let mut next = Vec::new();
            for &i in &ring {
                for &k in gram.row(i).0 {
                    if !seen[k] {
                        seen[k] = true;
                        next.push(k);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            reached.extend_from_slice(&next);
            ring = next;
            let near: Vec<usize> = reached.iter().copied().filter(|&k| !masked[k]).collect();
            let m = near.len();
            if m == 0 {
                continue;
            }
            let mut g = vec![0.0; m * m];
            for (a, &ka) in near.iter().enumerate() {
                for (b, &kb) in near.iter().enumerate() {
                    g[a * m + b] = gram.get(ka, kb);
                }
            }
            let rhs: Vec<f64> = near.iter().map(|&k| gram.get(k, j)).collect();
            let c = DenseMatrix::new(m, g)?.cholesky()?.solve(&rhs)?;
            // squared residual of the least-squares fit
            let res = gjj - c.iter().zip(&rhs).map(|(x, y)| x * y).sum::<f64>();
            best = Some((near, c));
            if res <= DEPENDENCE_TOL * gjj {
                break;
            }
        }
        for &k in &reached {
            seen[k] = false;
        }
        if let Some((near, c)) = best {
            t.extend(near.iter().zip(c).map(|(&k, ck)| (k, j, ck)));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

impl Hierarchy {
    /// Builds the region tree over `points` and the hierarchy on top of it.
    /// `a` is ordered component-major with `a.nrows() = dim * points.len()`.
    pub fn build(
        a: &CsrMatrix,
        constrained: &[bool],
        points: &[Point],
        dim: usize,
        cfg: &HierarchyConfig,
    ) -> Result<Self> {
        let tree = RegionTree::build(points, dim, cfg.threshold_for(dim))?;
        Self::from_tree(a, constrained, &tree, cfg)
    }

    pub fn from_tree(
        a: &CsrMatrix,
        constrained: &[bool],
        tree: &RegionTree,
        cfg: &HierarchyConfig,
    ) -> Result<Self> {
        let d = tree.dim();
        let n = tree.num_points();
        if !a.is_square() || a.nrows() != d * n {
            return Err(Error::DimensionMismatch {
                op: "Hierarchy::from_tree",
                expected: d * n,
                found: a.nrows(),
            });
        }
        if constrained.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                op: "Hierarchy::from_tree (constraint mask)",
                expected: a.nrows(),
                found: constrained.len(),
            });
        }
        check_level(0, a, constrained)?;
        let mut levels = vec![Level {
            a: a.clone(),
            masked: constrained.to_vec(),
            depth: None,
            setup_seconds: 0.0,
        }];
        let mut transfers = Vec::new();
        let mut previous = None;
        // maps the previous level's values onto its kept DOFs
        let mut fold: Option<CsrMatrix> = None;
        for depth in (1..=tree.height()).rev() {
            let start = Instant::now();
            let coarse = tree.coarse_level(depth)?;
            let scalar = match &previous {
                None => prolongation_from_points(tree, &coarse, cfg.weights)?,
                Some(finer) => prolongation_between(tree, finer, &coarse, cfg.weights)?,
            };
            let full = TransferOperator::from_scalar(&scalar, d);
            let fine = levels.last().expect("at least the fine level");
            let p = match &fold {
                Some(m) => m.matmul(full.matrix())?,
                None => full.matrix().with_zero_rows(&fine.masked),
            };
            let gram = p.transpose().matmul(&p)?;
            let masked = dependent_columns(&gram, DEPENDENCE_TOL)?;
            fold = Some(fold_matrix(&gram, &masked)?);
            let p = p.with_zero_cols(&masked);
            let r = p.transpose();
            let nc = p.ncols();
            let ac = triple_product(&r, &fine.a, &p)?.with_unit_rows_cols(&masked)?;
            let index = levels.len();
            check_level(index, &ac, &masked)?;
            transfers.push(full.with_matrix(p));
            levels.push(Level {
                a: ac,
                masked,
                depth: Some(depth),
                setup_seconds: start.elapsed().as_secs_f64(),
            });
            if nc <= cfg.coarsest_cap {
                break;
            }
            if depth == 1 {
                return Err(Error::Hierarchy(format!(
                    "root level still has {nc} DOFs, above the dense cap {}; raise the cap",
                    cfg.coarsest_cap
                )));
            }
            previous = Some(coarse);
        }
        let last = levels.len() - 1;
        let coarsest = DenseMatrix::from_csr(&levels[last].a)?
            .cholesky()
            .map_err(|e| Error::CoarseNotSpd {
                level: last,
                source: Box::new(e),
            })?;
        Ok(Self {
            levels,
            transfers,
            coarsest,
        })
    }

    /// One level, solved directly.
    pub fn direct(a: &CsrMatrix) -> Result<Self> {
        let coarsest = DenseMatrix::from_csr(a)?.cholesky()?;
        Ok(Self {
            levels: vec![Level {
                a: a.clone(),
                masked: vec![false; a.nrows()],
                depth: None,
                setup_seconds: 0.0,
            }],
            transfers: Vec::new(),
            coarsest,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    /// Prolongation from level `l + 1` to level `l`.
    pub fn transfer(&self, l: usize) -> &TransferOperator {
        &self.transfers[l]
    }

    pub fn transfers(&self) -> &[TransferOperator] {
        &self.transfers
    }

    pub fn coarsest(&self) -> &Cholesky {
        &self.coarsest
    }

    pub fn dofs_per_level(&self) -> Vec<usize> {
        self.levels.iter().map(Level::num_dofs).collect()
    }

    /// Total stored entries over all level matrices divided by those of the fine one.
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum();
        total as f64 / self.levels[0].a.nnz() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elasticity::{assemble, ProblemSpec};
    use crate::mesh::{generate_mesh, rectangle_mesh, MeshKind};
    use crate::sparse::dot;
    use crate::transfer::TransferOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_leaf_gives_two_levels() {
        let mesh = rectangle_mesh(1, 1, 1.0, 1.0).unwrap();
        let spec = ProblemSpec::for_kind(MeshKind::SquareHolePlate);
        let sys = assemble(&mesh, &spec.material(2).unwrap(), &spec.bc).unwrap();
        let h = Hierarchy::build(&sys.a, &sys.constrained, mesh.vertices(), 2, &HierarchyConfig::default()).unwrap();
        assert_eq!(h.num_levels(), 2);
        assert_eq!(h.level(1).num_dofs(), 8);
        assert_eq!(h.coarsest().order(), 8);
    }

    #[test]
    fn square_hole_plate_levels_are_spd() {
        let mesh = generate_mesh(MeshKind::SquareHolePlate, 0).unwrap();
        let spec = ProblemSpec::for_kind(MeshKind::SquareHolePlate);
        let sys = assemble(&mesh, &spec.material(2).unwrap(), &spec.bc).unwrap();
        let cfg = HierarchyConfig {
            coarsest_cap: 100,
            ..HierarchyConfig::default()
        };
        let h = Hierarchy::build(&sys.a, &sys.constrained, mesh.vertices(), 2, &cfg).unwrap();
        assert!(h.num_levels() >= 3, "{:?}", h.dofs_per_level());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (l, level) in h.levels().iter().enumerate() {
            assert!(level.a.is_symmetric(1e-12));
            if level.num_dofs() <= 2000 {
                assert!(DenseMatrix::from_csr(&level.a).unwrap().cholesky().is_ok(), "level {l}");
            }
            for _ in 0..100 {
                let w: Vec<f64> = (0..level.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert!(dot(&w, &level.a.spmv(&w).unwrap()) > 0.0);
            }
        }
        // Galerkin identity against a column-by-column recomputation
        for l in 0..h.num_levels() - 1 {
            let p = h.transfer(l).matrix();
            let a = &h.level(l).a;
            let ac = &h.level(l + 1).a;
            let masked = &h.level(l + 1).masked;
            let scale = ac.max_abs();
            for j in 0..p.ncols() {
                if masked[j] {
                    continue;
                }
                let mut e = vec![0.0; p.ncols()];
                e[j] = 1.0;
                let col = p.transpose().spmv(&a.spmv(&p.spmv(&e).unwrap()).unwrap()).unwrap();
                for (i, v) in col.iter().enumerate() {
                    let want = if masked[i] { 0.0 } else { *v };
                    assert!((ac.get(i, j) - want).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn constrained_rows_of_p_are_zero() {
        let mesh = generate_mesh(MeshKind::RingQuadrant, 0).unwrap();
        let spec = ProblemSpec::for_kind(MeshKind::RingQuadrant);
        let sys = assemble(&mesh, &spec.material(2).unwrap(), &spec.bc).unwrap();
        let h = Hierarchy::build(&sys.a, &sys.constrained, mesh.vertices(), 2, &HierarchyConfig::default()).unwrap();
        let p = h.transfer(0).matrix();
        for (i, &c) in sys.constrained.iter().enumerate() {
            assert_eq!(p.row(i).0.is_empty(), c || p.row(i).0.is_empty());
            if c {
                assert!(p.row(i).0.is_empty());
            }
        }
    }

    #[test]
    fn dropped_columns_fold_into_the_next_transfer() {
        // cells whose points lie on one line make some columns proportional
        let mesh = rectangle_mesh(3, 5, 1.0, 1.0).unwrap();
        let spec = ProblemSpec::for_kind(MeshKind::SquareHolePlate);
        let sys = assemble(&mesh, &spec.material(2).unwrap(), &spec.bc).unwrap();
        let cfg = HierarchyConfig {
            coarsest_cap: 10,
            ..HierarchyConfig::default()
        };
        let tree = RegionTree::build(mesh.vertices(), 2, 4).unwrap();
        let h = Hierarchy::from_tree(&sys.a, &sys.constrained, &tree, &cfg).unwrap();
        assert!(h.num_levels() >= 3);
        let l1 = tree.coarse_level(h.level(1).depth.unwrap()).unwrap();
        let p0 = prolongation_from_points(&tree, &l1, WeightScheme::Multilinear).unwrap();
        let p0t = TransferOperator::from_scalar(&p0, 2).matrix().with_zero_rows(&sys.constrained).transpose();
        let folded = (0..p0t.nrows()).filter(|&j| h.level(1).masked[j] && !p0t.row(j).0.is_empty()).count();
        assert!(folded > 0, "no dependent columns to fold");
        let composite = h.transfer(0).matrix().matmul(h.transfer(1).matrix()).unwrap();
        let l2 = tree.coarse_level(h.level(2).depth.unwrap()).unwrap();
        let direct = prolongation_from_points(&tree, &l2, WeightScheme::Multilinear).unwrap();
        let direct = TransferOperator::from_scalar(&direct, 2).matrix().with_zero_rows(&sys.constrained);
        let masked = &h.level(2).masked;
        for i in 0..composite.nrows() {
            for j in (0..composite.ncols()).filter(|&j| !masked[j]) {
                assert!((composite.get(i, j) - direct.get(i, j)).abs() <= 1e-9, "({i}, {j}) {} {}", composite.get(i, j), direct.get(i, j));
            }
        }
    }

    #[test]
    fn dense_cap_too_small_is_an_error() {
        let mesh = rectangle_mesh(3, 3, 1.0, 1.0).unwrap();
        let spec = ProblemSpec::for_kind(MeshKind::SquareHolePlate);
        let sys = assemble(&mesh, &spec.material(2).unwrap(), &spec.bc).unwrap();
        let cfg = HierarchyConfig {
            coarsest_cap: 4,
            ..HierarchyConfig::default()
        };
        let err = Hierarchy::build(&sys.a, &sys.constrained, mesh.vertices(), 2, &cfg).unwrap_err();
        assert!(matches!(err, Error::Hierarchy(_)), "{err}");
    }
}
