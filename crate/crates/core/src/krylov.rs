//! Preconditioned conjugate gradients with convergence reporting.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::sparse::vector::axpy_in_place;
use crate::sparse::{dot, norm2, CsrMatrix};

/// Symmetric positive definite operator `z = B r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;

    fn name(&self) -> &str {
        "custom"
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Diagonal scaling `z_i = r_i / a_ii`.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(row) = diag.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::NotSpd { row, pivot: diag[row] });
        }
        Ok(Self {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
        Ok(())
    }

    fn name(&self) -> &str {
        "jacobi"
    }
}

/// Denominator of the relative residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopNorm {
    /// `||F - A U0||`.
    #[default]
    InitialResidual,
    /// `||F||`.
    Rhs,
}

impl fmt::Display for StopNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InitialResidual => "initial-residual",
            Self::Rhs => "rhs",
        })
    }
}

impl FromStr for StopNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial-residual" | "res0" => Ok(Self::InitialResidual),
            "rhs" => Ok(Self::Rhs),
            _ => Err(Error::InvalidArgument(format!("unknown stopping norm '{s}'"))),
        }
    }
}

/// Default iteration cap `10 sqrt(n) + 1000`.
pub fn default_max_iters(n: usize) -> usize {
    (10.0 * (n as f64).sqrt()) as usize + 1000
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    pub tol: f64,
    /// `None` uses [`default_max_iters`].
    pub max_iters: Option<usize>,
    pub stop: StopNorm,
    /// The recursive residual is replaced by `F - A U` this often; 0 disables it.
    pub replace_every: usize,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: None,
            stop: StopNorm::InitialResidual,
            replace_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual after each iteration; entry 0 is the initial one.
    pub rel_res_history: Vec<f64>,
    /// Wall seconds since the start of the iteration, per history entry.
    pub elapsed: Vec<f64>,
    pub converged: bool,
    pub setup_seconds: f64,
    pub apply_seconds: f64,
    pub total_seconds: f64,
    pub condition_estimate: Option<f64>,
    /// `||F - A U0||`.
    pub res0: f64,
    pub rhs_norm: f64,
    /// `(iteration, |‖r_recursive‖ - ‖F - A U‖| / ‖F‖)` at each replacement.
    pub residual_drift: Vec<(usize, f64)>,
}

impl SolveReport {
    pub fn final_rel_res(&self) -> f64 {
        *self.rel_res_history.last().unwrap_or(&f64::NAN)
    }

    /// Adds preconditioner setup time and refreshes the total.
    pub fn with_setup(mut self, seconds: f64) -> Self {
        self.setup_seconds = seconds;
        self.total_seconds = self.setup_seconds + self.apply_seconds;
        self
    }

    /// History as CSV rows `iteration,rel_res,seconds`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,rel_res,seconds\n");
        for (k, (r, t)) in self.rel_res_history.iter().zip(&self.elapsed).enumerate() {
            out.push_str(&format!("{k},{r:e},{t:e}\n"));
        }
        out
    }
}

fn check_dims(a: &CsrMatrix, f: &[f64], u0: &[f64]) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch { op: "pcg (square)", expected: n, found: a.ncols() });
    }
    for (op, len) in [("pcg (rhs)", f.len()), ("pcg (initial guess)", u0.len())] {
        if len != n {
            return Err(Error::DimensionMismatch { op, expected: n, found: len });
        }
    }
    Ok(())
}

/// Solves `A U = F` by PCG. The report carries apply time only; use
/// [`SolveReport::with_setup`] to add preconditioner construction time.
pub fn pcg(
    a: &CsrMatrix,
    f: &[f64],
    b: &dyn Preconditioner,
    u0: &[f64],
    cfg: &PcgConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, f, u0)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    let start = Instant::now();
    let n = a.nrows();
    let k_max = cfg.max_iters.unwrap_or_else(|| default_max_iters(n));
    let mut u = u0.to_vec();
    let mut r = a.spmv(&u)?;
    for (ri, fi) in r.iter_mut().zip(f) {
        *ri = fi - *ri;
    }
    let res0 = norm2(&r);
    let rhs_norm = norm2(f);
    let denom = match cfg.stop {
        StopNorm::InitialResidual => res0,
        StopNorm::Rhs => rhs_norm,
    };
    let mut report = SolveReport {
        res0,
        rhs_norm,
        ..SolveReport::default()
    };
    let finish = |mut report: SolveReport, u: Vec<f64>, converged: bool, alphas: &[f64], betas: &[f64]| {
        report.converged = converged;
        report.condition_estimate = condition_estimate(alphas, betas);
        report.apply_seconds = start.elapsed().as_secs_f64();
        report.total_seconds = report.apply_seconds;
        (u, report)
    };
    if res0 == 0.0 {
        report.rel_res_history.push(0.0);
        report.elapsed.push(start.elapsed().as_secs_f64());
        return Ok(finish(report, u, true, &[], &[]));
    }
    report.rel_res_history.push(res0 / denom);
    report.elapsed.push(start.elapsed().as_secs_f64());

    let mut z = vec![0.0; n];
    b.apply(&r, &mut z)?;
    let mut p = z.clone();
    let mut rho_old = dot(&r, &z);
    if !(rho_old > 0.0) {
        return Err(Error::PreconditionerNotSpd { iteration: 0, rho: rho_old });
    }
    let mut q = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for k in 1..=k_max {
        a.spmv_into(&p, &mut q)?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NotSpd { row: k, pivot: pq });
        }
        let alpha = rho_old / pq;
        alphas.push(alpha);
        axpy_in_place(alpha, &p, &mut u);
        axpy_in_place(-alpha, &q, &mut r);
        if cfg.replace_every > 0 && k % cfg.replace_every == 0 {
            let recursive = norm2(&r);
            a.spmv_into(&u, &mut r)?;
            for (ri, fi) in r.iter_mut().zip(f) {
                *ri = fi - *ri;
            }
            let drift = (recursive - norm2(&r)).abs() / if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
            report.residual_drift.push((k, drift));
        }
        let rel = norm2(&r) / denom;
        report.rel_res_history.push(rel);
        report.elapsed.push(start.elapsed().as_secs_f64());
        report.iterations = k;
        if rel < cfg.tol {
            return Ok(finish(report, u, true, &alphas, &betas));
        }
        b.apply(&r, &mut z)?;
        let rho_new = dot(&r, &z);
        if !(rho_new > 0.0) {
            return Err(Error::PreconditionerNotSpd { iteration: k, rho: rho_new });
        }
        let beta = rho_new / rho_old;
        betas.push(beta);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rho_old = rho_new;
    }
    Ok(finish(report, u, false, &alphas, &betas))
}

/// Estimate of `kappa(BA)` from the CG coefficients: the ratio of the extreme
/// eigenvalues of the Lanczos tridiagonal
/// `T_jj = 1/alpha_j + beta_{j-1}/alpha_{j-1}`, `T_j,j+1 = sqrt(beta_j)/alpha_j`.
/// Uses the first `alphas.len()` steps; `betas` may be one longer than needed.
pub fn condition_estimate(alphas: &[f64], betas: &[f64]) -> Option<f64> {
    let m = alphas.len();
    if m == 0 || betas.len() + 1 < m {
        return None;
    }
    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m {
        let mut d = 1.0 / alphas[j];
        if j > 0 {
            d += betas[j - 1] / alphas[j - 1];
        }
        diag.push(d);
        if j + 1 < m {
            off.push(betas[j].sqrt() / alphas[j]);
        }
    }
    let (lo, hi) = tridiagonal_extremes(&diag, &off);
    (lo > 0.0 && hi.is_finite()).then(|| hi / lo)
}

/// Number of eigenvalues below `x` (Sturm sequence).
fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = d - x - if i > 0 { e2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalues of a symmetric tridiagonal matrix by bisection.
fn tridiagonal_extremes(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |e| e.abs());
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let bisect = |k: usize| {
        // smallest x with count_below(x) > k
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(diag, off, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(n - 1))
}
