//! Region tree: a quadtree (2D) or octree (3D) of square/cube cells over the
//! mesh vertices, split whenever a cell holds more vertices than a threshold.
//!
//! Cell bounds are never stored as floats. A node at depth `k` (root = 1) with
//! integer anchor `m` spans `[low + m h_k, low + (m + 1) h_k]` per axis, where
//! `h_k = side / 2^(k-1)`. Multiplying by a power of two is exact, so a lattice
//! coordinate computes to the same float at every depth and all containment
//! tests agree with each other.
//!
//! Children (and cell corners) are ordered clockwise from the top-left:
//! top-left, top-right, bottom-right, bottom-left. In 3D the four z-low
//! children come first, then the four z-high ones in the same pattern.
//! A point on a shared face belongs to the lowest-numbered child whose closed
//! region contains it.

mod build;
mod level;

use std::fmt::Write as _;
use std::ops::Range;

pub use level::{Cell, CoarseLevel};

use crate::error::{Error, Result};
use crate::mesh::{MeshStats, Point};

/// Deepest allowed node; finer cells would fall below double resolution.
pub const MAX_DEPTH: u32 = 52;

const SEL2: [[u64; 3]; 4] = [[0, 1, 0], [1, 1, 0], [1, 0, 0], [0, 0, 0]];
const SEL3: [[u64; 3]; 8] = [
    [0, 1, 0],
    [1, 1, 0],
    [1, 0, 0],
    [0, 0, 0],
    [0, 1, 1],
    [1, 1, 1],
    [1, 0, 1],
    [0, 0, 1],
];

/// Per-axis offsets (0 = low side, 1 = high side) of children and corners, in order.
pub fn selectors(dim: usize) -> &'static [[u64; 3]] {
    if dim == 2 {
        &SEL2
    } else {
        &SEL3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionNode {
    depth: u32,
    anchor: [u64; 3],
    /// `NO_NODE` at the root.
    parent: u32,
    /// `NO_NODE` for leaves.
    first_child: u32,
    /// Span of `RegionTree::leaf_vertices`; empty for internal nodes.
    vertices: Range<u32>,
    retained: bool,
}

const NO_NODE: u32 = u32::MAX;

impl RegionNode {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn anchor(&self) -> [u64; 3] {
        self.anchor
    }

    pub fn parent(&self) -> Option<usize> {
        (self.parent != NO_NODE).then_some(self.parent as usize)
    }

    pub fn is_leaf(&self) -> bool {
        self.first_child == NO_NODE
    }

    fn first_child(&self) -> Option<usize> {
        (self.first_child != NO_NODE).then_some(self.first_child as usize)
    }

    fn span(&self) -> Range<usize> {
        self.vertices.start as usize..self.vertices.end as usize
    }

    /// False for leaves that ended up without vertices.
    pub fn is_retained(&self) -> bool {
        self.retained
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeStats {
    pub height: u32,
    pub num_leaves: usize,
    pub max_leaf_occupancy: usize,
    /// `q log2(N) + 3/2`.
    pub depth_bound: f64,
    /// `height <= ceil(depth_bound) + 1`.
    pub within_bound: bool,
}

#[derive(Debug, Clone)]
pub struct RegionTree {
    dim: usize,
    low: f64,
    side: f64,
    threshold: usize,
    height: u32,
    nodes: Vec<RegionNode>,
    /// Leaf vertex lists back to back; each leaf holds a range.
    leaf_vertices: Vec<usize>,
    points: Vec<Point>,
    fine_vertex_region: Vec<usize>,
}

/// `low + index * side / 2^(depth - 1)`.
fn lattice(low: f64, side: f64, depth: u32, index: u64) -> f64 {
    low + index as f64 * (side / (1u64 << (depth - 1)) as f64)
}

impl RegionTree {
    /// Inserts the points one at a time in the given order, splitting a leaf
    /// as soon as it holds more than `threshold` points.
    pub fn build(points: &[Point], dim: usize, threshold: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Tree(format!("dimension {dim} not supported")));
        }
        if points.is_empty() {
            return Err(Error::Tree("no points".into()));
        }
        if threshold == 0 {
            return Err(Error::Tree("threshold must be at least 1".into()));
        }
        let mut points = points.to_vec();
        for (i, p) in points.iter_mut().enumerate() {
            if p[..dim].iter().any(|c| !c.is_finite()) {
                return Err(Error::Tree(format!("point {i} has non-finite coordinates")));
            }
            if dim == 2 {
                p[2] = 0.0;
            }
        }
        let (mut low, mut high) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &points {
            for &c in &p[..dim] {
                low = low.min(c);
                high = high.max(c);
            }
        }
        let mut side = high - low;
        if side == 0.0 {
            side = 1.0;
        }
        while low + side < high {
            side = f64::from_bits(side.to_bits() + 1);
        }
        let (nodes, leaf_vertices) = build::insert_all(&points, dim, threshold, low, side)?;
        let mut tree = Self {
            dim,
            low,
            side,
            threshold,
            height: 1,
            nodes,
            leaf_vertices,
            points,
            fine_vertex_region: Vec::new(),
        };
        tree.prune_and_index();
        Ok(tree)
    }

    /// Marks empty leaves as not retained and records the leaf of every vertex.
    /// Running it again changes nothing.
    pub fn prune_and_index(&mut self) {
        self.fine_vertex_region = vec![usize::MAX; self.points.len()];
        let mut height = 1;
        for (k, node) in self.nodes.iter_mut().enumerate() {
            node.retained = !node.is_leaf() || !node.vertices.is_empty();
            if node.retained {
                height = height.max(node.depth);
            }
            for &v in &self.leaf_vertices[node.span()] {
                self.fine_vertex_region[v] = k;
            }
        }
        self.height = height;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// Depth of the deepest retained node (root alone = 1).
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Vertices stored in leaf `k`; empty for internal nodes.
    pub fn leaf_vertices(&self, k: usize) -> &[usize] {
        &self.leaf_vertices[self.nodes[k].span()]
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn root_low(&self) -> f64 {
        self.low
    }

    pub fn root_side(&self) -> f64 {
        self.side
    }

    pub fn nodes(&self) -> &[RegionNode] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &RegionNode {
        &self.nodes[k]
    }

    pub fn children(&self, k: usize) -> Option<Range<usize>> {
        self.nodes[k].first_child().map(|c| c..c + (1 << self.dim))
    }

    /// Leaf holding fine vertex `v`.
    pub fn leaf_of(&self, v: usize) -> usize {
        self.fine_vertex_region[v]
    }

    pub fn fine_vertex_region(&self) -> &[usize] {
        &self.fine_vertex_region
    }

    /// Lattice coordinate `low + index * side / 2^(depth-1)`.
    #[inline]
    pub fn lattice_coord(&self, depth: u32, index: u64) -> f64 {
        lattice(self.low, self.side, depth, index)
    }

    /// Closed bounds `[low, high]` per axis (unused axes are `[0, 0]`).
    pub fn bounds_of(&self, depth: u32, anchor: [u64; 3]) -> [[f64; 2]; 3] {
        let mut b = [[0.0; 2]; 3];
        for a in 0..self.dim {
            b[a] = [self.lattice_coord(depth, anchor[a]), self.lattice_coord(depth, anchor[a] + 1)];
        }
        b
    }

    pub fn node_bounds(&self, k: usize) -> [[f64; 2]; 3] {
        self.bounds_of(self.nodes[k].depth, self.nodes[k].anchor)
    }

    pub fn node_contains(&self, k: usize, p: &Point) -> bool {
        let b = self.node_bounds(k);
        (0..self.dim).all(|a| b[a][0] <= p[a] && p[a] <= b[a][1])
    }

    /// First child in order whose closed cell holds `p`, which must lie in node `k`.
    /// Each axis is decided by one comparison with the cell midpoint; a
    /// coordinate on the midpoint admits both halves.
    fn child_containing(&self, k: usize, p: &Point) -> Result<usize> {
        let node = &self.nodes[k];
        let first = node.first_child().ok_or_else(|| Error::Tree(format!("node {k} is a leaf")))?;
        let mut allowed = [[false; 2]; 3];
        for a in 0..self.dim {
            let mid = self.lattice_coord(node.depth + 1, 2 * node.anchor[a] + 1);
            allowed[a] = [p[a] <= mid, p[a] >= mid];
        }
        selectors(self.dim)
            .iter()
            .position(|s| (0..self.dim).all(|a| allowed[a][s[a] as usize]))
            .map(|c| first + c)
            .ok_or_else(|| Error::OutsideRegion(format!("{p:?} not in node {k}")))
    }

    /// Leaf containing `p`, descending to the lowest-numbered child at every
    /// tie. The leaf may be an empty (pruned) one when `p` is not a vertex.
    pub fn locate(&self, p: &Point) -> Result<usize> {
        if !self.node_contains(0, p) {
            return Err(Error::OutsideRegion(format!(
                "{:?} outside the root cell",
                &p[..self.dim]
            )));
        }
        let mut k = 0;
        while !self.nodes[k].is_leaf() {
            k = self.child_containing(k, p)?;
        }
        Ok(k)
    }

    /// Ancestor of node `k` at depth `depth`, or `k` itself if it is not deeper.
    pub fn ancestor_at(&self, mut k: usize, depth: u32) -> usize {
        while self.nodes[k].depth > depth {
            k = self.nodes[k].parent().expect("non-root node has a parent");
        }
        k
    }

    pub fn retained_leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&k| self.nodes[k].is_leaf() && self.nodes[k].retained)
    }

    pub fn tree_stats(&self, ms: &MeshStats) -> TreeStats {
        let bound = ms.depth_bound();
        TreeStats {
            height: self.height,
            num_leaves: self.retained_leaves().count(),
            max_leaf_occupancy: self
                .retained_leaves()
                .map(|k| self.nodes[k].vertices.len())
                .max()
                .unwrap_or(0),
            depth_bound: bound,
            within_bound: f64::from(self.height) <= bound.ceil() + 1.0,
        }
    }

    /// Depth-first text listing of the tree with bounds and vertex lists.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "region-tree dim={} threshold={} points={} height={} root_low={:e} root_side={:e}",
            self.dim,
            self.threshold,
            self.points.len(),
            self.height,
            self.low,
            self.side
        );
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            let n = &self.nodes[k];
            let b = self.node_bounds(k);
            let bounds: Vec<String> = (0..self.dim).map(|a| format!("[{:e},{:e}]", b[a][0], b[a][1])).collect();
            let anchor: Vec<String> = n.anchor[..self.dim].iter().map(|m| m.to_string()).collect();
            let indent = "  ".repeat(n.depth as usize - 1);
            let kind = match (n.is_leaf(), n.retained) {
                (false, _) => "node".to_string(),
                (true, true) => {
                    let vs: Vec<String> = self.leaf_vertices[n.span()].iter().map(|v| v.to_string()).collect();
                    format!("leaf vertices={}", vs.join(","))
                }
                (true, false) => "leaf empty".to_string(),
            };
            let _ = writeln!(
                s,
                "{indent}#{k} depth={} anchor={} bounds={} {kind}",
                n.depth,
                anchor.join(","),
                bounds.join("x")
            );
            if let Some(ch) = self.children(k) {
                stack.extend(ch.rev());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::point_stats;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2(x: f64, y: f64) -> Point {
        [x, y, 0.0]
    }

    fn corners() -> Vec<Point> {
        vec![p2(0.0, 1.0), p2(1.0, 1.0), p2(1.0, 0.0), p2(0.0, 0.0)]
    }

    #[test]
    fn below_threshold_stays_leaf() {
        let t = RegionTree::build(&corners(), 2, 4).unwrap();
        assert_eq!(t.height(), 1);
        assert!(t.node(0).is_leaf());
        assert_eq!(t.leaf_vertices(0).len(), 4);
    }

    #[test]
    fn five_points_split_once() {
        let mut pts = corners();
        pts.push(p2(0.25, 0.75));
        let t = RegionTree::build(&pts, 2, 4).unwrap();
        assert_eq!(t.height(), 2);
        let ch: Vec<usize> = t.children(0).unwrap().collect();
        assert_eq!(t.leaf_vertices(ch[0]), &[0, 4]);
        assert_eq!(t.leaf_vertices(ch[1]), &[1]);
        assert_eq!(t.leaf_vertices(ch[2]), &[2]);
        assert_eq!(t.leaf_vertices(ch[3]), &[3]);
        assert!(ch.iter().all(|&c| t.node(c).is_retained()));
        assert_eq!(t.locate(&p2(0.5, 0.5)).unwrap(), ch[0]);
        assert_eq!(t.locate(&p2(0.9, 0.1)).unwrap(), ch[2]);
        assert!(t.locate(&p2(1.5, 0.5)).is_err());
    }

    #[test]
    fn collinear_left_edge_prunes_right() {
        let pts = vec![p2(0.0, 0.0), p2(0.0, 0.5), p2(0.0, 1.0)];
        let t = RegionTree::build(&pts, 2, 2).unwrap();
        let ch: Vec<usize> = t.children(0).unwrap().collect();
        assert!(t.node(ch[0]).is_retained() && t.node(ch[3]).is_retained());
        assert!(!t.node(ch[1]).is_retained() && !t.node(ch[2]).is_retained());
        let mut again = t.clone();
        again.prune_and_index();
        assert_eq!(again.nodes(), t.nodes());
        assert_eq!(again.fine_vertex_region(), t.fine_vertex_region());
    }

    #[test]
    fn duplicates_and_empty_rejected() {
        let pts = vec![p2(0.0, 0.0), p2(1.0, 0.0), p2(-0.0, 0.0)];
        assert!(matches!(RegionTree::build(&pts, 2, 4), Err(Error::DuplicateVertex(0, 2))));
        assert!(RegionTree::build(&[], 2, 4).is_err());
        assert!(RegionTree::build(&corners(), 2, 0).is_err());
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in p.iter_mut().take(dim) {
                    *c = rng.gen_range(0.0..1.0);
                }
                p
            })
            .collect()
    }

    fn check_partition(t: &RegionTree) {
        let mut count = vec![0usize; t.num_points()];
        for k in t.retained_leaves() {
            let vs = t.leaf_vertices(k);
            assert!(!vs.is_empty() && vs.len() <= t.threshold());
            for &v in vs {
                count[v] += 1;
                assert!(t.node_contains(k, &t.points()[v]));
                assert_eq!(t.leaf_of(v), k);
            }
        }
        assert!(count.iter().all(|&c| c == 1));
        for k in 0..t.nodes().len() {
            if !t.node(k).is_leaf() {
                assert!(t.leaf_vertices(k).is_empty());
            }
        }
    }

    #[test]
    fn random_cloud_partition() {
        for dim in [2, 3] {
            let pts = random_points(1000, dim, 1);
            let t = RegionTree::build(&pts, dim, 4).unwrap();
            check_partition(&t);
            for (v, p) in pts.iter().enumerate() {
                assert_eq!(t.locate(p).unwrap(), t.leaf_of(v));
            }
            let st = t.tree_stats(&point_stats(&pts).unwrap());
            assert!(st.within_bound, "{st:?}");
        }
    }

    #[test]
    fn uniform_lattice_height() {
        // 2^k x 2^k cells, (2^k + 1)^2 points
        for k in 0..=5u32 {
            let m = (1usize << k) + 1;
            let h = 1.0 / (m - 1) as f64;
            let pts: Vec<Point> = (0..m * m).map(|i| p2((i % m) as f64 * h, (i / m) as f64 * h)).collect();
            let t = RegionTree::build(&pts, 2, 4).unwrap();
            assert_eq!(t.height(), k + 1, "{m}x{m}");
        }
    }

    #[test]
    fn children_partition_parent() {
        let t = RegionTree::build(&random_points(300, 3, 9), 3, 8).unwrap();
        for k in 0..t.nodes().len() {
            let Some(ch) = t.children(k) else { continue };
            let pb = t.node_bounds(k);
            let mut vol = 0.0;
            for c in ch {
                let cb = t.node_bounds(c);
                for a in 0..3 {
                    assert!(pb[a][0] <= cb[a][0] && cb[a][1] <= pb[a][1]);
                }
                vol += (0..3).map(|a| cb[a][1] - cb[a][0]).product::<f64>();
            }
            let pv: f64 = (0..3).map(|a| pb[a][1] - pb[a][0]).product();
            assert!((vol - pv).abs() <= 1e-12 * pv);
        }
    }

    #[test]
    fn dump_lists_every_vertex() {
        let mut pts = corners();
        pts.push(p2(0.25, 0.75));
        let t = RegionTree::build(&pts, 2, 4).unwrap();
        let d = t.dump();
        assert!(d.starts_with("region-tree dim=2 threshold=4 points=5 height=2"));
        assert_eq!(d.lines().count(), 6);
        assert!(d.contains("leaf vertices=0,4"));
    }

    fn leaf_signature(t: &RegionTree) -> Vec<(u32, [u64; 3], Vec<usize>)> {
        let mut sig: Vec<_> = t
            .retained_leaves()
            .map(|k| {
                let mut vs = t.leaf_vertices(k).to_vec();
                vs.sort_unstable();
                (t.node(k).depth(), t.node(k).anchor(), vs)
            })
            .collect();
        sig.sort();
        sig
    }

    proptest! {
        #[test]
        fn final_partition_ignores_insertion_order(
            raw in proptest::collection::vec((0u32..64, 0u32..64), 2..50),
            threshold in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut pts: Vec<Point> = raw.iter().map(|&(x, y)| p2(x as f64 / 8.0, y as f64 / 8.0)).collect();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup();
            prop_assume!(pts.len() >= 2);
            let a = RegionTree::build(&pts, 2, threshold).unwrap();
            let mut order: Vec<usize> = (0..pts.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let shuffled: Vec<Point> = order.iter().map(|&i| pts[i]).collect();
            let b = RegionTree::build(&shuffled, 2, threshold).unwrap();
            let remap = |sig: Vec<(u32, [u64; 3], Vec<usize>)>| -> Vec<(u32, [u64; 3], Vec<usize>)> {
                let mut out: Vec<_> = sig
                    .into_iter()
                    .map(|(d, a, vs)| {
                        let mut vs: Vec<usize> = vs.into_iter().map(|v| order[v]).collect();
                        vs.sort_unstable();
                        (d, a, vs)
                    })
                    .collect();
                out.sort();
                out
            };
            prop_assert_eq!(leaf_signature(&a), remap(leaf_signature(&b)));
            check_partition(&a);
        }

        #[test]
        fn matches_sequential_insertion(
            raw in proptest::collection::vec((0u32..64, 0u32..64, 0u32..64), 2..80),
            dim in 2usize..4,
            threshold in 1usize..6,
        ) {
            let pts: Vec<Point> = raw
                .iter()
                .map(|&(x, y, z)| [x as f64 / 8.0, y as f64 / 8.0, if dim == 3 { z as f64 / 8.0 } else { 0.0 }])
                .collect();
            match (RegionTree::build(&pts, dim, threshold), sequential(&pts, dim, threshold)) {
                (Ok(t), Ok(want)) => {
                    let mut got: Vec<_> = t
                        .retained_leaves()
                        .map(|k| (t.node(k).depth(), t.node(k).anchor(), t.leaf_vertices(k).to_vec()))
                        .collect();
                    got.sort();
                    prop_assert_eq!(got, want);
                }
                (Err(Error::DuplicateVertex(a, b)), Err((c, d))) => prop_assert_eq!((a, b), (c, d)),
                (got, want) => prop_assert!(false, "{:?} vs {:?}", got.map(|t| t.height()), want),
            }
        }
    }

    /// One point at a time, splitting a leaf as soon as it overflows. Returns
    /// retained leaves as (depth, anchor, vertices) or the first duplicate pair.
    #[allow(clippy::type_complexity)]
    fn sequential(pts: &[Point], dim: usize, threshold: usize) -> std::result::Result<Vec<(u32, [u64; 3], Vec<usize>)>, (usize, usize)> {
        struct N {
            depth: u32,
            anchor: [u64; 3],
            kids: Option<usize>,
            vs: Vec<usize>,
        }
        let lo = pts.iter().flat_map(|p| p[..dim].to_vec()).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().flat_map(|p| p[..dim].to_vec()).fold(f64::NEG_INFINITY, f64::max);
        let side = if hi > lo { hi - lo } else { 1.0 };
        let inside = |n: &N, p: &Point| {
            let h = side / f64::from(1u32 << (n.depth - 1));
            (0..dim).all(|a| lo + n.anchor[a] as f64 * h <= p[a] && p[a] <= lo + (n.anchor[a] + 1) as f64 * h)
        };
        let mut nodes = vec![N { depth: 1, anchor: [0; 3], kids: None, vs: vec![] }];
        let nk = 1usize << dim;
        for (v, p) in pts.iter().enumerate() {
            let mut k = 0;
            while let Some(c) = nodes[k].kids {
                k = (c..c + nk).find(|&c| inside(&nodes[c], p)).unwrap();
            }
            if let Some(&w) = nodes[k].vs.iter().find(|&&w| pts[w] == *p) {
                return Err((w, v));
            }
            nodes[k].vs.push(v);
            let mut stack = vec![k];
            while let Some(k) = stack.pop() {
                if nodes[k].vs.len() <= threshold {
                    continue;
                }
                let c = nodes.len();
                for s in &selectors(dim)[..nk] {
                    let anchor = [0, 1, 2].map(|a| 2 * nodes[k].anchor[a] + s[a]);
                    nodes.push(N { depth: nodes[k].depth + 1, anchor, kids: None, vs: vec![] });
                }
                for w in std::mem::take(&mut nodes[k].vs) {
                    let j = (c..c + nk).find(|&j| inside(&nodes[j], &pts[w])).unwrap();
                    nodes[j].vs.push(w);
                }
                nodes[k].kids = Some(c);
                stack.extend(c..c + nk);
            }
        }
        let mut leaves: Vec<_> = nodes
            .into_iter()
            .filter(|n| n.kids.is_none() && !n.vs.is_empty())
            .map(|n| (n.depth, n.anchor, n.vs))
            .collect();
        leaves.sort();
        Ok(leaves)
    }

    #[test]
    fn coincident_cluster_rejected() {
        let mut pts = vec![p2(0.0, 0.0), p2(1.0, 1.0)];
        // three consecutive doubles share a depth-capped cell
        pts.extend((0..3).map(|i| p2(0.5, f64::from_bits(0.5f64.to_bits() + i))));
        assert!(matches!(RegionTree::build(&pts, 2, 2), Err(Error::Tree(_))));
        pts.push(p2(0.0, 0.0));
        assert!(matches!(RegionTree::build(&pts, 2, 2), Err(Error::Tree(_))));
        pts.swap(2, 5);
        assert!(matches!(RegionTree::build(&pts, 2, 2), Err(Error::DuplicateVertex(0, 2))));
    }
}
