//! Dense symmetric matrices and their Cholesky factorization (coarsest-level solves).

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != order * order {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::new",
                expected: order * order,
                found: entries.len(),
            });
        }
        Ok(Self { order, entries })
    }

    pub fn identity(order: usize) -> Self {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            entries[i * order + i] = 1.0;
        }
        Self { order, entries }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            entries[i * n + i] = *d;
        }
        Self { order: n, entries }
    }

    pub fn from_csr(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::from_csr",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        Ok(Self {
            order: a.nrows(),
            entries: a.to_dense(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.order {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::matvec",
                expected: self.order,
                found: x.len(),
            });
        }
        Ok(self
            .entries
            .chunks_exact(self.order)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }
}

/// Column block width of the factorization.
const BLOCK: usize = 64;

/// Dot product with four independent partial sums, which vectorizes.
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular factor `L` with `M = L Lᵀ`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    order: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Blocked right-looking factorization: each block of `BLOCK` columns is
    /// factored in place, then its panel updates the trailing lower triangle.
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        let n = m.order;
        let mut l = m.entries.clone();
        let mut panel = Vec::new();
        for kb in (0..n).step_by(BLOCK) {
            let ke = (kb + BLOCK).min(n);
            for i in kb..n {
                for j in kb..ke.min(i + 1) {
                    let s = dot4(&l[i * n + kb..i * n + j], &l[j * n + kb..j * n + j]);
                    let v = l[i * n + j] - s;
                    if i == j {
                        if !(v > 0.0) || !v.is_finite() {
                            return Err(Error::NotSpd { row: i, pivot: v });
                        }
                        l[i * n + i] = v.sqrt();
                    } else {
                        l[i * n + j] = v / l[j * n + j];
                    }
                }
            }
            let w = ke - kb;
            panel.clear();
            for i in ke..n {
                panel.extend_from_slice(&l[i * n + kb..i * n + ke]);
            }
            for i in ke..n {
                let pi = &panel[(i - ke) * w..(i - ke + 1) * w];
                for j in ke..=i {
                    l[i * n + j] -= dot4(pi, &panel[(j - ke) * w..(j - ke + 1) * w]);
                }
            }
        }
        for i in 0..n {
            l[i * n + i + 1..(i + 1) * n].fill(0.0);
        }
        Ok(Self { order: n, lower: l })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let n = self.order;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                op: "Cholesky::solve",
                expected: n,
                found: x.len(),
            });
        }
        let l = &self.lower;
        for i in 0..n {
            let s: f64 = l[i * n..i * n + i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let xi = x[i] / l[i * n + i];
            x[i] = xi;
            for k in 0..i {
                x[k] -= l[i * n + k] * xi;
            }
        }
        Ok(())
    }
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn dense_cholesky_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.order() {
        return Err(Error::DimensionMismatch {
            op: "dense_cholesky_solve",
            expected: m.order(),
            found: b.len(),
        });
    }
    m.cholesky()?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::vector::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let x = dense_cholesky_solve(&DenseMatrix::identity(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0]);
        let x = dense_cholesky_solve(&DenseMatrix::from_diagonal(&[2.0, 4.0]), &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15, "{x:?}");
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum::<f64>();
            }
            m[i * n + i] += 1.0;
        }
        let m = DenseMatrix::new(n, m).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = dense_cholesky_solve(&m, &b).unwrap();
        let mx = m.matvec(&x).unwrap();
        let r: Vec<f64> = mx.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b));
    }

    #[test]
    fn indefinite_rejected() {
        let m = DenseMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let err = dense_cholesky_solve(&m, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotSpd { row: 1, .. }));
        assert!(err.to_string().contains("not SPD"));
    }
}
