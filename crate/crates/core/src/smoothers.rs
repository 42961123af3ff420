//! Gauss-Seidel relaxation in forward, backward and symmetric order.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Rows `0, 1, ..., n - 1`.
    #[default]
    Forward,
    /// Rows `n - 1, ..., 0`.
    Backward,
    /// A forward sweep followed by a backward one.
    Symmetric,
}

impl fmt::Display for SweepOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forward => "forward",
            Self::Backward => "backward",
            Self::Symmetric => "symmetric",
        })
    }
}

impl FromStr for SweepOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "backward" => Ok(Self::Backward),
            "symmetric" => Ok(Self::Symmetric),
            _ => Err(Error::InvalidArgument(format!("unknown sweep order '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmootherConfig {
    pub sweeps: usize,
    pub order: SweepOrder,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            sweeps: 3,
            order: SweepOrder::Forward,
        }
    }
}

impl SmootherConfig {
    pub fn new(sweeps: usize, order: SweepOrder) -> Self {
        Self { sweeps, order }
    }
}

/// Gauss-Seidel smoother with the diagonal of `A` extracted once.
#[derive(Debug, Clone)]
pub struct GaussSeidel {
    diag: Vec<f64>,
}

impl GaussSeidel {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "GaussSeidel::new",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let diag = a.diagonal();
        if let Some(row) = diag.iter().position(|&d| d == 0.0 || !d.is_finite()) {
            return Err(Error::ZeroDiagonal(row));
        }
        Ok(Self { diag })
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    fn check(&self, a: &CsrMatrix, f: &[f64], u: &[f64]) -> Result<()> {
        let n = self.diag.len();
        for (op, len) in [("GaussSeidel (matrix)", a.nrows()), ("GaussSeidel (rhs)", f.len()), ("GaussSeidel (iterate)", u.len())] {
            if len != n {
                return Err(Error::DimensionMismatch { op, expected: n, found: len });
            }
        }
        Ok(())
    }

    #[inline]
    fn relax(&self, a: &CsrMatrix, f: &[f64], u: &mut [f64], i: usize) {
        let (cols, vals) = a.row(i);
        let mut sigma = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                sigma += v * u[j];
            }
        }
        u[i] = (f[i] - sigma) / self.diag[i];
    }

    /// One forward sweep in place.
    pub fn forward(&self, a: &CsrMatrix, f: &[f64], u: &mut [f64]) -> Result<()> {
        self.check(a, f, u)?;
        for i in 0..self.diag.len() {
            self.relax(a, f, u, i);
        }
        Ok(())
    }

    /// One backward sweep in place.
    pub fn backward(&self, a: &CsrMatrix, f: &[f64], u: &mut [f64]) -> Result<()> {
        self.check(a, f, u)?;
        for i in (0..self.diag.len()).rev() {
            self.relax(a, f, u, i);
        }
        Ok(())
    }

    pub fn smooth(&self, a: &CsrMatrix, f: &[f64], u: &mut [f64], cfg: SmootherConfig) -> Result<()> {
        self.check(a, f, u)?;
        for _ in 0..cfg.sweeps {
            match cfg.order {
                SweepOrder::Forward => self.forward(a, f, u)?,
                SweepOrder::Backward => self.backward(a, f, u)?,
                SweepOrder::Symmetric => {
                    self.forward(a, f, u)?;
                    self.backward(a, f, u)?;
                }
            }
        }
        Ok(())
    }
}

/// Applies `cfg.sweeps` Gauss-Seidel sweeps to a copy of `u`.
pub fn gs_sweep(a: &CsrMatrix, f: &[f64], u: &[f64], cfg: SmootherConfig) -> Result<Vec<f64>> {
    let gs = GaussSeidel::new(a)?;
    let mut out = u.to_vec();
    gs.smooth(a, f, &mut out, cfg)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsSolution {
    pub u: Vec<f64>,
    /// Sweeps that did not meet the stopping test; a solve that stops on the
    /// first sweep reports 0.
    pub iterations: usize,
    /// `||U - U_old||` of the last sweep.
    pub err: f64,
    pub converged: bool,
}

/// Growth of the step norm over its first value that counts as divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Forward Gauss-Seidel iteration until `||U - U_old|| < eps` or `k_max` sweeps.
pub fn gs_solve(a: &CsrMatrix, f: &[f64], u0: &[f64], k_max: usize, eps: f64) -> Result<GsSolution> {
    gs_solve_observed(a, f, u0, k_max, eps, |_, _| {})
}

/// [`gs_solve`] calling `observe(sweep, &u)` after every sweep.
pub fn gs_solve_observed(
    a: &CsrMatrix,
    f: &[f64],
    u0: &[f64],
    k_max: usize,
    eps: f64,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<GsSolution> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let gs = GaussSeidel::new(a)?;
    let mut u = u0.to_vec();
    let mut old = vec![0.0; u.len()];
    let mut first = None;
    let mut err = f64::INFINITY;
    let mut k = 0;
    while k < k_max {
        old.copy_from_slice(&u);
        gs.forward(a, f, &mut u)?;
        observe(k + 1, &u);
        err = norm2(&u.iter().zip(&old).map(|(x, y)| x - y).collect::<Vec<_>>());
        if err < eps {
            return Ok(GsSolution {
                u,
                iterations: k,
                err,
                converged: true,
            });
        }
        let e0 = *first.get_or_insert(err);
        if !err.is_finite() || err > DIVERGENCE_FACTOR * e0 {
            return Err(Error::Diverged { iterations: k + 1, err });
        }
        k += 1;
    }
    Ok(GsSolution {
        u,
        iterations: k,
        err,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{dot, DenseMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
        // B^T B + shift, not diagonally dominant in general
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
            }
            a[i * n + i] += 0.1;
        }
        CsrMatrix::from_dense(n, n, &a).unwrap()
    }

    fn a_norm_err(a: &CsrMatrix, u: &[f64], exact: &[f64]) -> f64 {
        let e: Vec<f64> = u.iter().zip(exact).map(|(x, y)| x - y).collect();
        dot(&e, &a.spmv(&e).unwrap()).sqrt()
    }

    fn reversed(a: &CsrMatrix) -> CsrMatrix {
        let n = a.nrows();
        let t: Vec<_> = a.triplets().map(|(i, j, v)| (n - 1 - i, n - 1 - j, v)).collect();
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn two_by_two_forward_sweep() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let u = gs_sweep(&a, &[3.0, 4.0], &[0.0, 0.0], SmootherConfig::new(1, SweepOrder::Forward)).unwrap();
        assert_eq!(u[0], 1.5);
        assert!((u[1] - 2.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_matrix_solved_in_one_sweep() {
        let a = CsrMatrix::from_dense(3, 3, &[2.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 8.0]).unwrap();
        let u = gs_sweep(&a, &[1.0, 1.0, 1.0], &[5.0, 5.0, 5.0], SmootherConfig::new(1, SweepOrder::Backward)).unwrap();
        assert_eq!(u, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn zero_sweeps_is_identity() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let u0 = [0.3, -0.7];
        for order in [SweepOrder::Forward, SweepOrder::Backward, SweepOrder::Symmetric] {
            assert_eq!(gs_sweep(&a, &[3.0, 4.0], &u0, SmootherConfig::new(0, order)).unwrap(), u0.to_vec());
        }
    }

    #[test]
    fn zero_diagonal_names_the_row() {
        let a = CsrMatrix::from_dense(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let err = gs_sweep(&a, &[1.0; 3], &[0.0; 3], SmootherConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ZeroDiagonal(2)), "{err}");
    }

    #[test]
    fn identity_converges_at_once() {
        let a = CsrMatrix::identity(4);
        let s = gs_solve(&a, &[1.0, 2.0, 3.0, 4.0], &[0.0; 4], 10, 1e-12).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations, 1);
        assert_eq!(s.err, 0.0);
        assert_eq!(s.u, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn two_by_two_solve_matches_dense() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let f = [3.0, 4.0];
        let exact = DenseMatrix::from_csr(&a).unwrap().cholesky().unwrap().solve(&f).unwrap();
        let s = gs_solve(&a, &f, &[0.0, 0.0], 1000, 1e-10).unwrap();
        assert!(s.converged);
        for (x, y) in s.u.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-9);
        }
        let mut u = vec![0.0, 0.0];
        let gs = GaussSeidel::new(&a).unwrap();
        let mut prev = a_norm_err(&a, &u, &exact);
        for _ in 0..20 {
            gs.forward(&a, &f, &mut u).unwrap();
            let e = a_norm_err(&a, &u, &exact);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn random_spd_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = random_spd(20, &mut rng);
        let d = a.diagonal();
        // the test matrix is not diagonally dominant
        assert!((0..20).any(|i| {
            let (c, v) = a.row(i);
            c.iter().zip(v).filter(|(&j, _)| j != i).map(|(_, x)| x.abs()).sum::<f64>() > d[i]
        }));
        let f: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = DenseMatrix::from_csr(&a).unwrap().cholesky().unwrap().solve(&f).unwrap();
        let s = gs_solve(&a, &f, &[0.0; 20], 2_000_000, 1e-12).unwrap();
        assert!(s.converged);
        let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in s.u.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-6 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        // indefinite with a dominant off-diagonal coupling
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 10.0, 10.0, 1.0]).unwrap();
        let err = gs_solve(&a, &[1.0, 1.0], &[0.0, 0.0], 1000, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn a_norm_monotone_per_symmetric_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [5, 12, 30] {
            let a = random_spd(n, &mut rng);
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let exact = DenseMatrix::from_csr(&a).unwrap().cholesky().unwrap().solve(&f).unwrap();
            let gs = GaussSeidel::new(&a).unwrap();
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut prev = a_norm_err(&a, &u, &exact);
            for _ in 0..50 {
                gs.smooth(&a, &f, &mut u, SmootherConfig::new(1, SweepOrder::Symmetric)).unwrap();
                let e = a_norm_err(&a, &u, &exact);
                assert!(e <= prev * (1.0 + 1e-12), "{e} > {prev}");
                prev = e;
            }
        }
    }

    #[test]
    fn reversal_duality_is_exact_on_tridiagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, rng.gen_range(2.5..4.0)));
            if i + 1 < n {
                let v = rng.gen_range(-1.0..1.0);
                t.push((i, i + 1, v));
                t.push((i + 1, i, v));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fwd = gs_sweep(&a, &f, &u0, SmootherConfig::new(2, SweepOrder::Forward)).unwrap();
        let rf: Vec<f64> = f.iter().rev().copied().collect();
        let ru: Vec<f64> = u0.iter().rev().copied().collect();
        let mut bwd = gs_sweep(&reversed(&a), &rf, &ru, SmootherConfig::new(2, SweepOrder::Backward)).unwrap();
        bwd.reverse();
        assert_eq!(fwd, bwd);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reversal_duality(seed in any::<u64>(), n in 2usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(n, &mut rng);
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fwd = gs_sweep(&a, &f, &vec![0.0; n], SmootherConfig::new(1, SweepOrder::Forward)).unwrap();
            let rf: Vec<f64> = f.iter().rev().copied().collect();
            let mut bwd = gs_sweep(&reversed(&a), &rf, &vec![0.0; n], SmootherConfig::new(1, SweepOrder::Backward)).unwrap();
            bwd.reverse();
            let scale = fwd.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (x, y) in fwd.iter().zip(&bwd) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn symmetric_sweep_is_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 20;
            let a = random_spd(n, &mut rng);
            let f1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = SmootherConfig::new(1, SweepOrder::Symmetric);
            let s1 = gs_sweep(&a, &f1, &vec![0.0; n], cfg).unwrap();
            let s2 = gs_sweep(&a, &f2, &vec![0.0; n], cfg).unwrap();
            let (l, r) = (dot(&s1, &f2), dot(&f1, &s2));
            let scale = crate::sparse::norm2(&s1) * crate::sparse::norm2(&f2);
            prop_assert!((l - r).abs() <= 1e-12 * scale.max(1.0), "{} vs {}", l, r);
        }
    }
}
