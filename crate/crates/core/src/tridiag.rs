//! Tridiagonal line solves (Thomas algorithm).
//!
//! All three bands have the full line length `n`; `lower[0]` and
//! `upper[n - 1]` are ignored.

use crate::error::{Error, Result};

pub const DEFAULT_PIVOT_TOL: f64 = 1e-14;

/// Solves `A x = rhs` and returns `x`.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    let mut scratch = vec![0.0; rhs.len()];
    solve_in_place(lower, diag, upper, &mut x, &mut scratch, DEFAULT_PIVOT_TOL)?;
    Ok(x)
}

/// In-place Thomas elimination: `rhs` is overwritten with the solution.
///
/// `scratch` must be at least as long as `rhs`. Fails with `SingularLine`
/// when a pivot magnitude drops below `pivot_tol`.
pub fn solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
    pivot_tol: f64,
) -> Result<()> {
    let n = rhs.len();
    debug_assert!(lower.len() >= n && diag.len() >= n && upper.len() >= n);
    debug_assert!(scratch.len() >= n);
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    if pivot.abs() < pivot_tol {
        return Err(Error::SingularLine { row: 0, pivot });
    }
    scratch[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * scratch[i - 1];
        if pivot.abs() < pivot_tol {
            return Err(Error::SingularLine { row: i, pivot });
        }
        scratch[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    Ok(())
}
