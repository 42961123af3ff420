//! Direct solver for sparse SPD systems: reverse Cuthill-McKee ordering
//! followed by an envelope (skyline) Cholesky factorization.
//!
//! Used for reference solutions at sizes where a dense factorization is out
//! of reach but the bandwidth after reordering stays modest.

use std::collections::VecDeque;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    let neighbors_sorted = |v: usize, visited: &[bool]| -> Vec<usize> {
        let mut nb: Vec<usize> = a.row(v).0.iter().copied().filter(|&w| w != v && !visited[w]).collect();
        nb.sort_by_key(|&w| (degree[w], w));
        nb
    };

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: repeat BFS from the last, lowest-degree level
        let mut start = seed;
        let mut ecc = 0usize;
        for _ in 0..4 {
            let (last, depth) = bfs_last_level(a, start, &degree);
            if depth <= ecc {
                break;
            }
            ecc = depth;
            start = last;
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for w in neighbors_sorted(v, &visited) {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_last_level(a: &CsrMatrix, start: usize, degree: &[usize]) -> (usize, usize) {
    let n = a.nrows();
    let mut level = vec![usize::MAX; n];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0usize);
    while let Some(v) = queue.pop_front() {
        let lv = level[v];
        if lv > best.1 || (lv == best.1 && degree[v] < degree[best.0]) {
            best = (v, lv);
        }
        for &w in a.row(v).0 {
            if level[w] == usize::MAX {
                level[w] = lv + 1;
                queue.push_back(w);
            }
        }
    }
    best
}

/// Envelope Cholesky factor of `A[perm, perm]`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Ok(Self::factor_impl(a, None)?.0)
    }

    /// Factors `a` while skipping every pivot that falls below `rel_tol` times
    /// its original diagonal entry. Skipped rows and columns are treated as
    /// removed from the matrix; returns the factor of what remains and the
    /// skip mask (in original numbering).
    fn factor_impl(a: &CsrMatrix, rel_tol: Option<f64>) -> Result<(Self, Vec<bool>)> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "EnvelopeCholesky::factor",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // envelope of the permuted lower triangle
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &c in a.row(old).0 {
                let j = inv[c];
                if j < i && j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for old in 0..n {
            let i = inv[old];
            let (cols, vals) = a.row(old);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = inv[c];
                if j <= i {
                    data[start[i] + j - first[i]] += v;
                }
            }
        }
        let mut skipped = vec![false; n];
        for i in 0..n {
            let fi = first[i];
            let ri = start[i] - fi;
            let original = data[ri + i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = 0.0;
                let rj = start[j] - fj;
                for k in k0..j {
                    s += data[ri + k] * data[rj + k];
                }
                let v = data[ri + j] - s;
                if j < i {
                    data[ri + j] = if skipped[j] { 0.0 } else { v / data[rj + j] };
                    continue;
                }
                match rel_tol {
                    Some(tol) if v <= tol * original.abs() => {
                        skipped[i] = true;
                        data[ri + fi..=ri + i].iter_mut().for_each(|x| *x = 0.0);
                    }
                    _ if !(v > 0.0) || !v.is_finite() => {
                        return Err(Error::NotSpd { row: perm[i], pivot: v });
                    }
                    _ => data[ri + i] = v.sqrt(),
                }
            }
        }
        let mut mask = vec![false; n];
        for (new, &old) in perm.iter().enumerate() {
            mask[old] = skipped[new];
        }
        Ok((
            Self {
                perm,
                first,
                start,
                data,
            },
            mask,
        ))
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.perm.len();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                op: "EnvelopeCholesky::solve",
                expected: n,
                found: b.len(),
            });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let base = self.start[i] - fi;
            let mut s = 0.0;
            for k in fi..i {
                s += self.data[base + k] * y[k];
            }
            y[i] = (y[i] - s) / self.data[base + i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let base = self.start[i] - fi;
            let yi = y[i] / self.data[base + i];
            y[i] = yi;
            for k in fi..i {
                y[k] -= self.data[base + k] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

/// Marks a maximal set of rows/columns of the symmetric positive semidefinite
/// `gram` whose removal leaves it positive definite: a column is dropped when
/// its Cholesky pivot is below `rel_tol` times its diagonal entry. Applied to
/// `P^T P`, the kept columns of `P` span the same space as all of them.
pub fn dependent_columns(gram: &CsrMatrix, rel_tol: f64) -> Result<Vec<bool>> {
    Ok(EnvelopeCholesky::factor_impl(gram, Some(rel_tol))?.1)
}

/// Direct solve of a sparse SPD system.
pub fn sparse_cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    EnvelopeCholesky::factor(a)?.solve(b)
}
