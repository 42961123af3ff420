//! Euclidean vector kernels on plain `f64` slices.

use crate::error::{Error, Result};

fn check(op: &'static str, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            op,
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Dot product. Panics on length mismatch; use [`try_dot`] for a checked version.
#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dot: length mismatch");
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn try_dot(x: &[f64], y: &[f64]) -> Result<f64> {
    check("dot", x, y)?;
    Ok(dot(x, y))
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check("axpy", x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| alpha * a + b).collect())
}

/// `y += alpha * x` in place.
#[inline]
pub fn axpy_in_place(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy: length mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check("sub", x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| a - b).collect())
}
