//! Extreme pairwise vertex distances and the spread exponent `q`.
//!
//! Both extremes are exact for every input size. `d_min` comes from a sweep
//! along the axis of largest extent, `d_max` from a radius-pruned pair search
//! around the centroid (`|p - q| <= |p - c| + |q - c|`). Sets of at most
//! 4096 points fall back to the plain all-pairs loop.

use super::{distance, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub num_points: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// `log(d_max / d_min) / log(N)`.
    pub q_exponent: f64,
}

impl MeshStats {
    /// Theoretical bound on region-tree height: `q * log2(N) + 3/2`.
    pub fn depth_bound(&self) -> f64 {
        self.q_exponent * (self.num_points as f64).log2() + 1.5
    }
}

const ALL_PAIRS_LIMIT: usize = 4096;

pub fn point_stats(points: &[Point]) -> Result<MeshStats> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "mesh statistics need at least 2 points, got {n}"
        )));
    }
    let (d_min, d_max) = if n <= ALL_PAIRS_LIMIT {
        all_pairs(points)
    } else {
        (sweep_min(points), pruned_max(points))
    };
    if d_min == 0.0 {
        return Err(Error::InvalidArgument("coincident points (d_min = 0)".into()));
    }
    Ok(MeshStats {
        num_points: n,
        d_min,
        d_max,
        q_exponent: (d_max / d_min).ln() / (n as f64).ln(),
    })
}

fn all_pairs(points: &[Point]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = distance(&points[i], &points[j]);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

fn sweep_min(points: &[Point]) -> f64 {
    let axis = (0..3)
        .max_by(|&a, &b| {
            let ext = |k: usize| {
                let (lo, hi) = points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p[k]), h.max(p[k])));
                hi - lo
            };
            ext(a).total_cmp(&ext(b))
        })
        .unwrap_or(0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i][axis].total_cmp(&points[j][axis]));
    let mut best = f64::INFINITY;
    for a in 0..order.len() {
        let p = &points[order[a]];
        for &j in &order[a + 1..] {
            let q = &points[j];
            if q[axis] - p[axis] >= best {
                break;
            }
            best = best.min(distance(p, q));
        }
    }
    best
}

fn pruned_max(points: &[Point]) -> f64 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    let mut by_radius: Vec<(f64, usize)> =
        points.iter().enumerate().map(|(i, p)| (distance(p, &c), i)).collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: f64 = 0.0;
    for a in 0..by_radius.len() {
        let (ra, i) = by_radius[a];
        if 2.0 * ra * (1.0 + 1e-12) < best {
            break;
        }
        for &(rb, j) in &by_radius[a + 1..] {
            if (ra + rb) * (1.0 + 1e-12) < best {
                break;
            }
            best = best.max(distance(&points[i], &points[j]));
        }
    }
    best
}
