use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Above this many states the discounted solves iterate instead of factoring.
pub(crate) const DIRECT_SOLVE_LIMIT: usize = 2000;

/// Sparse square matrix stored as rows of `(column, value)`.
pub(crate) type SparseRows = Vec<Vec<(usize, f64)>>;

/// Solves `v = rhs + γ P v`, or `v = rhs + γ Pᵀ v` when `transpose` is set.
///
/// `P` is row-stochastic, so the fixed point is unique for `γ < 1`.
pub(crate) fn solve_discounted(
    p: &SparseRows,
    gamma: f64,
    rhs: &[f64],
    transpose: bool,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n <= DIRECT_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (i, row) in p.iter().enumerate() {
            for &(j, v) in row {
                if transpose {
                    a[(j, i)] -= gamma * v;
                } else {
                    a[(i, j)] -= gamma * v;
                }
            }
        }
        let b = DVector::from_column_slice(rhs);
        let x = a.lu().solve(&b).ok_or(Error::Singular)?;
        return Ok(x.iter().copied().collect());
    }
    iterate(p, gamma, rhs, transpose)
}

fn apply(p: &SparseRows, v: &[f64], transpose: bool, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, row) in p.iter().enumerate() {
        if transpose {
            for &(j, w) in row {
                out[j] += w * v[i];
            }
        } else {
            out[i] = row.iter().map(|&(j, w)| w * v[j]).sum();
        }
    }
}

fn iterate(p: &SparseRows, gamma: f64, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut v = rhs.to_vec();
    let mut pv = vec![0.0; n];
    // error contracts by γ per sweep
    let max_sweeps = ((1e-14f64).ln() / gamma.ln()).ceil() as usize + 100;
    for _ in 0..max_sweeps.max(1000) {
        apply(p, &v, transpose, &mut pv);
        let mut residual = 0.0f64;
        for i in 0..n {
            let next = rhs[i] + gamma * pv[i];
            residual = residual.max((next - v[i]).abs());
            v[i] = next;
        }
        if residual < 1e-10 * (1.0 - gamma) {
            return Ok(v);
        }
    }
    Err(Error::Singular)
}
