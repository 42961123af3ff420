//! V-cycle over a Galerkin hierarchy, standalone or as a PCG preconditioner.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::krylov::{Preconditioner, SolveReport};
use crate::smoothers::GaussSeidel;
use crate::sparse::{norm2, CsrMatrix};
use crate::transfer::Hierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleKind {
    #[default]
    V,
}

impl fmt::Display for CycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("V")
    }
}

impl FromStr for CycleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(Self::V),
            "W" | "w" => Err(Error::InvalidArgument("W-cycle is not implemented".into())),
            _ => Err(Error::InvalidArgument(format!("unknown cycle '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VCycleConfig {
    /// Forward Gauss-Seidel sweeps before restriction.
    pub pre_sweeps: usize,
    /// Backward Gauss-Seidel sweeps after prolongation.
    pub post_sweeps: usize,
    pub cycle: CycleKind,
    /// Cycles per preconditioner application.
    pub cycles: usize,
}

impl Default for VCycleConfig {
    fn default() -> Self {
        Self {
            pre_sweeps: 3,
            post_sweeps: 3,
            cycle: CycleKind::V,
            cycles: 1,
        }
    }
}

/// Hierarchy with per-level smoothers and restriction matrices ready to cycle.
#[derive(Debug, Clone)]
pub struct VasmgPreconditioner {
    hierarchy: Hierarchy,
    smoothers: Vec<GaussSeidel>,
    restrictions: Vec<CsrMatrix>,
    cfg: VCycleConfig,
}

impl VasmgPreconditioner {
    pub fn new(hierarchy: Hierarchy, cfg: VCycleConfig) -> Result<Self> {
        if cfg.cycles == 0 {
            return Err(Error::InvalidArgument("at least one cycle per application".into()));
        }
        let nl = hierarchy.num_levels();
        let smoothers = hierarchy.levels()[..nl - 1]
            .iter()
            .map(|l| GaussSeidel::new(&l.a))
            .collect::<Result<_>>()?;
        let restrictions = hierarchy.transfers().iter().map(|t| t.restriction()).collect();
        Ok(Self {
            hierarchy,
            smoothers,
            restrictions,
            cfg,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn config(&self) -> VCycleConfig {
        self.cfg
    }

    /// One cycle starting at `level`, updating `u` in place.
    pub fn cycle(&self, level: usize, f: &[f64], u: &mut [f64]) -> Result<()> {
        let h = &self.hierarchy;
        if level >= h.num_levels() {
            return Err(Error::InvalidArgument(format!(
                "level {level} outside a {}-level hierarchy",
                h.num_levels()
            )));
        }
        let a = &h.level(level).a;
        if f.len() != a.nrows() || u.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                op: "v_cycle",
                expected: a.nrows(),
                found: if f.len() != a.nrows() { f.len() } else { u.len() },
            });
        }
        if level + 1 == h.num_levels() {
            u.copy_from_slice(f);
            return h.coarsest().solve_in_place(u);
        }
        let gs = &self.smoothers[level];
        for _ in 0..self.cfg.pre_sweeps {
            gs.forward(a, f, u)?;
        }
        let mut r = a.spmv(u)?;
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
        }
        let rc = self.restrictions[level].spmv(&r)?;
        let mut ec = vec![0.0; rc.len()];
        self.cycle(level + 1, &rc, &mut ec)?;
        let p = h.transfer(level).matrix();
        let ef = p.spmv(&ec)?;
        for (ui, ei) in u.iter_mut().zip(&ef) {
            *ui += ei;
        }
        for _ in 0..self.cfg.post_sweeps {
            gs.backward(a, f, u)?;
        }
        Ok(())
    }

    /// `z = B r`: `cfg.cycles` cycles from a zero initial guess.
    pub fn apply_vec(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut z = vec![0.0; r.len()];
        self.apply(r, &mut z)?;
        Ok(z)
    }
}

impl Preconditioner for VasmgPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.cfg.cycles {
            self.cycle(0, r, z)?;
        }
        Ok(())
    }

    fn name(&self) -> &str {
        "vasmg"
    }
}

/// One V-cycle from `u0` on `level` of `h`.
pub fn v_cycle(h: &Hierarchy, level: usize, f: &[f64], u0: &[f64], cfg: VCycleConfig) -> Result<Vec<f64>> {
    let pre = VasmgPreconditioner::new(h.clone(), cfg)?;
    let mut u = u0.to_vec();
    pre.cycle(level, f, &mut u)?;
    Ok(u)
}

/// Stand-alone multigrid iteration: cycles until `||F - A U|| / ||F - A U0|| < eps`.
/// `iterations` counts the cycles performed.
pub fn mg_solve(
    pre: &VasmgPreconditioner,
    f: &[f64],
    u0: &[f64],
    k_max: usize,
    eps: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let a = &pre.hierarchy().level(0).a;
    let residual_norm = |u: &[f64]| -> Result<f64> {
        let au = a.spmv(u)?;
        Ok(norm2(&f.iter().zip(&au).map(|(x, y)| x - y).collect::<Vec<_>>()))
    };
    let mut u = u0.to_vec();
    let res0 = residual_norm(&u)?;
    let mut report = SolveReport {
        res0,
        rhs_norm: norm2(f),
        ..SolveReport::default()
    };
    let mut converged = res0 == 0.0;
    report.rel_res_history.push(if converged { 0.0 } else { 1.0 });
    report.elapsed.push(start.elapsed().as_secs_f64());
    let mut k = 0;
    while !converged && k < k_max {
        pre.cycle(0, f, &mut u)?;
        k += 1;
        let rel = residual_norm(&u)? / res0;
        report.rel_res_history.push(rel);
        report.elapsed.push(start.elapsed().as_secs_f64());
        if !rel.is_finite() {
            return Err(Error::Diverged { iterations: k, err: rel });
        }
        converged = rel < eps;
    }
    report.iterations = k;
    report.converged = converged;
    report.apply_seconds = start.elapsed().as_secs_f64();
    report.total_seconds = report.apply_seconds;
    Ok((u, report))
}
