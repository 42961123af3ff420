//! Construction of the region tree.
//!
//! Inserting points one by one and splitting a leaf as soon as it overflows
//! yields a tree in which a cell is split exactly when it holds more than
//! `threshold` points, whatever the insertion order. The tree is therefore
//! built top-down: each overflowing cell stably partitions its points among
//! its children, so every leaf lists its vertices in insertion order. Errors
//! are reported as sequential insertion would raise them, for the earliest
//! point at which one occurs.

use super::{lattice, selectors, RegionNode, MAX_DEPTH, NO_NODE};
use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Clone, Copy)]
struct Entry<const D: usize> {
    p: [f64; D],
    v: u32,
}

/// The first failure met when inserting in index order.
enum Failure {
    /// Earlier and later index of two equal points.
    Duplicate(usize, usize),
    /// Depth-capped cell and the point that overflowed it.
    TooClose(u32, usize),
}

impl Failure {
    fn at(&self) -> (usize, u8) {
        match *self {
            Failure::Duplicate(_, later) => (later, 0),
            Failure::TooClose(_, v) => (v, 1),
        }
    }
}

/// Builds the node arena over `points` (root cell `[low, low + side]^dim`)
/// and returns it with the concatenated leaf vertex lists.
pub(super) fn insert_all(
    points: &[Point],
    dim: usize,
    threshold: usize,
    low: f64,
    side: f64,
) -> Result<(Vec<RegionNode>, Vec<usize>)> {
    if points.len() >= u32::MAX as usize {
        return Err(Error::Tree(format!("{} points exceed the index range", points.len())));
    }
    if dim == 2 {
        run::<2>(points, threshold, low, side)
    } else {
        run::<3>(points, threshold, low, side)
    }
}

fn run<const D: usize>(
    points: &[Point],
    threshold: usize,
    low: f64,
    side: f64,
) -> Result<(Vec<RegionNode>, Vec<usize>)> {
    let sel = selectors(D);
    // first child compatible with each per-axis pattern of admissible halves
    let table: Vec<u8> = (0..1usize << (2 * D))
        .map(|code| {
            sel.iter()
                .position(|s| (0..D).all(|a| code >> (2 * a + s[a] as usize) & 1 == 1))
                .map_or(u8::MAX, |c| c as u8)
        })
        .collect();
    let init: Vec<Entry<D>> = points
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let mut q = [0.0; D];
            q.copy_from_slice(&p[..D]);
            Entry { p: q, v: v as u32 }
        })
        .collect();
    // cells at depth d hold their points in bufs[d % 2]
    let mut bufs = [init.clone(), init];
    let mut codes: Vec<u8> = Vec::new();
    // roughly two nodes per full leaf
    let mut nodes = Vec::with_capacity(2 * points.len() / threshold + 16);
    nodes.push(RegionNode {
        depth: 1,
        anchor: [0; 3],
        parent: NO_NODE,
        first_child: NO_NODE,
        vertices: 0..points.len() as u32,
        retained: true,
    });
    let mut failure: Option<Failure> = None;
    let mut note = |f: Failure| {
        if failure.as_ref().map_or(true, |g| f.at() < g.at()) {
            failure = Some(f);
        }
    };
    let mut k = 0;
    while k < nodes.len() {
        let r = nodes[k].span();
        let (depth, anchor) = (nodes[k].depth, nodes[k].anchor);
        if r.len() <= threshold || depth >= MAX_DEPTH {
            let cur = &bufs[depth as usize % 2];
            if let Some((w, v)) = first_duplicate(&cur[r.clone()]) {
                note(Failure::Duplicate(w, v));
            }
            if r.len() > threshold {
                note(Failure::TooClose(depth, cur[r.start + threshold].v as usize));
            }
            k += 1;
            continue;
        }
        let mut mid = [0.0; D];
        for a in 0..D {
            mid[a] = lattice(low, side, depth + 1, 2 * anchor[a] + 1);
        }
        codes.clear();
        let mut counts = [0usize; 8];
        let [even, odd] = &mut bufs;
        let (cur, next) = if depth % 2 == 0 { (even, odd) } else { (odd, even) };
        for e in &cur[r.clone()] {
            let mut code = 0;
            for a in 0..D {
                code |= (usize::from(e.p[a] <= mid[a]) | usize::from(e.p[a] >= mid[a]) << 1) << (2 * a);
            }
            let c = table[code];
            counts[c as usize] += 1;
            codes.push(c);
        }
        let first = nodes.len();
        nodes[k].first_child = first as u32;
        nodes[k].vertices = 0..0;
        let mut offsets = [0usize; 8];
        let mut start = r.start;
        for (c, s) in sel.iter().enumerate() {
            offsets[c] = start;
            let end = start + counts[c];
            nodes.push(RegionNode {
                depth: depth + 1,
                anchor: [2 * anchor[0] + s[0], 2 * anchor[1] + s[1], 2 * anchor[2] + s[2]],
                parent: k as u32,
                first_child: NO_NODE,
                vertices: start as u32..end as u32,
                retained: true,
            });
            start = end;
        }
        for (e, &c) in cur[r].iter().zip(&codes) {
            next[offsets[c as usize]] = *e;
            offsets[c as usize] += 1;
        }
        k += 1;
    }
    match failure {
        Some(Failure::Duplicate(w, v)) => Err(Error::DuplicateVertex(w, v)),
        Some(Failure::TooClose(depth, _)) => Err(Error::Tree(format!(
            "cell at depth {depth} still holds {} points; points too close together",
            threshold + 1
        ))),
        None => {
            let mut flat = vec![0; points.len()];
            for n in nodes.iter().filter(|n| n.is_leaf()) {
                let r = n.span();
                for (o, e) in flat[r.clone()].iter_mut().zip(&bufs[n.depth as usize % 2][r]) {
                    *o = e.v as usize;
                }
            }
            Ok((nodes, flat))
        }
    }
}

/// In a cell listed in index order, the first point equal to an earlier one,
/// as `(earlier, later)`.
fn first_duplicate<const D: usize>(cell: &[Entry<D>]) -> Option<(usize, usize)> {
    for (j, b) in cell.iter().enumerate() {
        if let Some(a) = cell[..j].iter().find(|a| a.p == b.p) {
            return Some((a.v as usize, b.v as usize));
        }
    }
    None
}
