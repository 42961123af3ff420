//! Auxiliary coarse grids obtained by truncating the region tree at a depth.

use std::collections::HashMap;

use super::{selectors, RegionTree};
use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Tree node this cell is.
    pub node: usize,
    pub depth: u32,
    pub anchor: [u64; 3],
    /// Coarse vertex ids of the corners, in child order.
    pub corners: Vec<usize>,
}

/// Cells of the tree truncated at `depth`: retained nodes at that depth plus
/// retained leaves above it.
#[derive(Debug, Clone)]
pub struct CoarseLevel {
    depth: u32,
    dim: usize,
    cells: Vec<Cell>,
    vertices: Vec<Point>,
    keys: Vec<[u64; 3]>,
    vertex_cell: Vec<usize>,
    node_cell: HashMap<usize, usize>,
}

impl CoarseLevel {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Coarse vertex coordinates, numbered in order of first appearance.
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Integer lattice position of each coarse vertex at tree-height resolution.
    pub fn keys(&self) -> &[[u64; 3]] {
        &self.keys
    }

    /// First cell that listed each coarse vertex as a corner.
    pub fn vertex_cell(&self, v: usize) -> usize {
        self.vertex_cell[v]
    }

    pub fn cell_of_node(&self, node: usize) -> Option<usize> {
        self.node_cell.get(&node).copied()
    }
}

impl RegionTree {
    pub fn coarse_level(&self, depth: u32) -> Result<CoarseLevel> {
        if depth < 1 || depth > self.height() {
            return Err(Error::Tree(format!(
                "level depth {depth} outside 1..={}",
                self.height()
            )));
        }
        let height = self.height();
        let sel = selectors(self.dim());
        let mut level = CoarseLevel {
            depth,
            dim: self.dim(),
            cells: Vec::new(),
            vertices: Vec::new(),
            keys: Vec::new(),
            vertex_cell: Vec::new(),
            node_cell: HashMap::new(),
        };
        let mut ids: HashMap<[u64; 3], usize> = HashMap::new();
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            let node = self.node(k);
            if !node.is_retained() {
                continue;
            }
            if node.depth() < depth {
                if let Some(ch) = self.children(k) {
                    stack.extend(ch.rev());
                    continue;
                }
            }
            let cell_id = level.cells.len();
            let shift = height - node.depth();
            let anchor = node.anchor();
            let mut corners = Vec::with_capacity(sel.len());
            for s in sel {
                let mut key = [0u64; 3];
                for a in 0..self.dim() {
                    key[a] = (anchor[a] + s[a]) << shift;
                }
                let id = *ids.entry(key).or_insert_with(|| {
                    let mut p = [0.0; 3];
                    for a in 0..self.dim() {
                        p[a] = self.lattice_coord(height, key[a]);
                    }
                    level.vertices.push(p);
                    level.keys.push(key);
                    level.vertex_cell.push(cell_id);
                    level.vertices.len() - 1
                });
                corners.push(id);
            }
            level.node_cell.insert(k, cell_id);
            level.cells.push(Cell {
                node: k,
                depth: node.depth(),
                anchor,
                corners,
            });
        }
        Ok(level)
    }

    /// All levels, coarsest (depth 1) last: index 0 is depth = height.
    pub fn levels(&self) -> Vec<CoarseLevel> {
        (1..=self.height())
            .rev()
            .map(|d| self.coarse_level(d).expect("depth in range"))
            .collect()
    }

    pub fn cell_bounds(&self, cell: &Cell) -> [[f64; 2]; 3] {
        self.bounds_of(cell.depth, cell.anchor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn five_point_tree() -> RegionTree {
        let pts = vec![
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.25, 0.75, 0.0],
        ];
        RegionTree::build(&pts, 2, 4).unwrap()
    }

    #[test]
    fn five_point_levels() {
        let t = five_point_tree();
        let l2 = t.coarse_level(2).unwrap();
        assert_eq!((l2.cells().len(), l2.num_vertices()), (4, 9));
        let l1 = t.coarse_level(1).unwrap();
        assert_eq!((l1.cells().len(), l1.num_vertices()), (1, 4));
        // root corners clockwise from top-left
        assert_eq!(
            l1.vertices(),
            &[[0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        );
        // first cell is the top-left quadrant
        let c0 = &l2.cells()[0];
        let corners: Vec<Point> = c0.corners.iter().map(|&v| l2.vertices()[v]).collect();
        assert_eq!(corners, vec![[0.0, 1.0, 0.0], [0.5, 1.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.0]]);
        assert!(t.coarse_level(0).is_err() && t.coarse_level(3).is_err());
    }

    #[test]
    fn single_leaf_levels() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let t = RegionTree::build(&pts, 2, 4).unwrap();
        let levels = t.levels();
        assert_eq!(levels.len(), 1);
        assert_eq!(levels[0].num_vertices(), 4);
    }

    #[test]
    fn levels_nest_and_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Point> = (0..400)
            .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0])
            .collect();
        let t = RegionTree::build(&pts, 2, 4).unwrap();
        let levels = t.levels();
        assert_eq!(levels.len() as u32, t.height());
        for w in levels.windows(2) {
            let (fine, coarse) = (&w[0], &w[1]);
            assert!(coarse.num_vertices() < fine.num_vertices());
            for cell in fine.cells() {
                let anc = t.ancestor_at(cell.node, coarse.depth());
                let c = coarse.cell_of_node(anc).expect("ancestor is a coarse cell");
                let cc = &coarse.cells()[c];
                // integer nesting at the finer depth
                let shift = cell.depth - cc.depth;
                for a in 0..2 {
                    assert_eq!(cell.anchor[a] >> shift, cc.anchor[a]);
                }
            }
        }
        // every fine vertex lies in exactly one cell per level
        for level in &levels {
            let mut hits = vec![0usize; pts.len()];
            for cell in level.cells() {
                let mut stack = vec![cell.node];
                while let Some(k) = stack.pop() {
                    hits.iter_mut().enumerate().filter(|(v, _)| t.leaf_vertices(k).contains(v)).for_each(|(_, h)| *h += 1);
                    if let Some(ch) = t.children(k) {
                        stack.extend(ch);
                    }
                }
            }
            assert!(hits.iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn dedup_is_exact_in_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point> = (0..200)
            .map(|_| [rng.gen_range(-0.3..0.7), rng.gen_range(-0.3..0.7), rng.gen_range(-0.3..0.7)])
            .collect();
        let t = RegionTree::build(&pts, 3, 8).unwrap();
        for level in t.levels() {
            let mut keys = level.keys().to_vec();
            keys.sort_unstable();
            keys.dedup();
            assert_eq!(keys.len(), level.num_vertices());
            let mut coords: Vec<[u64; 3]> = level.vertices().iter().map(|p| p.map(f64::to_bits)).collect();
            coords.sort_unstable();
            coords.dedup();
            assert_eq!(coords.len(), level.num_vertices());
            for cell in level.cells() {
                assert_eq!(cell.corners.len(), 8);
                let b = t.cell_bounds(cell);
                for &v in &cell.corners {
                    let p = level.vertices()[v];
                    for a in 0..3 {
                        assert!(p[a] == b[a][0] || p[a] == b[a][1]);
                    }
                }
            }
        }
    }
}
