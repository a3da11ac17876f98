//! Two-phase revised simplex. Entering columns follow Dantzig's rule; after
//! a run of degenerate pivots the solver switches to Bland's rule, which
//! cannot cycle.
//!
//! Problems in this crate have a handful of equality rows against a few
//! thousand columns, so the basis matrix is refactored from the original data
//! at every pivot. That is cheap at this size and keeps round-off from
//! accumulating the way a running tableau does.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reduced-cost tolerance, relative to the largest cost.
const COST_TOL: f64 = 1e-10;
/// Smallest admissible pivot, relative to the largest entry of the column.
const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

/// Column `j` of [A | I] (artificials after the structural columns).
fn column(a: &[Vec<f64>], sign: &[f64], n: usize, j: usize) -> DVector<f64> {
    let m = a.len();
    if j < n {
        DVector::from_iterator(m, (0..m).map(|r| sign[r] * a[r][j]))
    } else {
        let mut e = DVector::zeros(m);
        e[j - n] = 1.0;
        e
    }
}

/// Degenerate pivots in a row before switching to Bland's rule.
const BLAND_AFTER: usize = 50;

/// Runs the simplex from `basis` over columns `0..allowed` (plus whatever
/// is basic). Returns the basic values.
fn run_phase(
    a: &[Vec<f64>],
    sign: &[f64],
    b: &DVector<f64>,
    n: usize,
    cost: &[f64],
    allowed: usize,
    basis: &mut [usize],
    pivots: &mut usize,
) -> Result<DVector<f64>> {
    let m = basis.len();
    let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let mut degenerate_run = 0;
    loop {
        let mut bm = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in basis.iter().enumerate() {
            bm.set_column(k, &column(a, sign, n, j));
        }
        let lu_t = bm.transpose().lu();
        let lu = bm.lu();
        let xb = lu.solve(b).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let cb = DVector::from_iterator(m, basis.iter().map(|&j| cost[j]));
        let y = lu_t.solve(&cb).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let bland = degenerate_run >= BLAND_AFTER;
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let yaj: f64 = if j < n { (0..m).map(|r| y[r] * sign[r] * a[r][j]).sum() } else { y[j - n] };
            let d = cost[j] - yaj;
            if d < -COST_TOL * scale && entering.is_none_or(|(_, best)| d < best) {
                entering = Some((j, d));
                if bland {
                    break;
                }
            }
        }
        let Some((j, _)) = entering else { return Ok(xb) };
        let u = lu.solve(&column(a, sign, n, j)).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let umax = u.amax();
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if u[r] > PIVOT_TOL * umax {
                let ratio = xb[r].max(0.0) / u[r];
                let better = match leave {
                    None => true,
                    Some((lr, best)) => {
                        let tie = ratio <= best * (1.0 + 1e-12) + 1e-300;
                        let wins_tie = if bland { basis[r] < basis[lr] } else { u[r] > u[lr] };
                        ratio < best * (1.0 - 1e-12) - 1e-300 || (tie && wins_tie)
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, ratio)) = leave else { return Err(Error::Unbounded) };
        degenerate_run = if ratio <= 0.0 { degenerate_run + 1 } else { 0 };
        basis[r] = j;
        *pivots += 1;
        if *pivots > MAX_PIVOTS {
            return Err(Error::NoConvergence { iterations: *pivots, residual: f64::NAN });
        }
    }
}

/// Minimizes `c · x` subject to `A x = b`, `x ≥ 0`. `a` holds the rows of A.
pub fn minimize_standard(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let bb = DVector::from_iterator(m, b.iter().zip(&sign).map(|(v, s)| v * s));
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0;
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    let xb = run_phase(a, &sign, &bb, n, &phase1, n + m, &mut basis, &mut pivots)?;
    let infeas: f64 = basis.iter().zip(xb.iter()).filter(|(j, _)| **j >= n).map(|(_, v)| v.max(0.0)).sum();
    let bscale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if infeas > 1e-9 * bscale {
        return Err(Error::Infeasible(format!("phase one stopped at infeasibility {infeas:.3e}")));
    }
    // Artificials still basic sit at zero; they stay but never re-enter.
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    let xb = run_phase(a, &sign, &bb, n, &cost, n, &mut basis, &mut pivots)?;
    let mut x = vec![0.0; n];
    for (&j, &v) in basis.iter().zip(xb.iter()) {
        if j < n {
            x[j] = v.max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution { value, x, pivots })
}

/// max g·c over free c subject to |row_r · c| ≤ bound_r, solved through the
/// dual: min Σ bound_r (y⁺_r + y⁻_r) with Σ_r row_r (y⁺_r − y⁻_r) = g.
/// Returns the optimal value; `Error::Unbounded` when the rows do not pin c.
pub fn maximize_box_constrained(rows: &[Vec<f64>], bounds: &[f64], g: &[f64]) -> Result<f64> {
    let k = g.len();
    let r = rows.len();
    let mut a = vec![vec![0.0; 2 * r]; k];
    for (j, row) in rows.iter().enumerate() {
        for i in 0..k {
            a[i][j] = row[i];
            a[i][r + j] = -row[i];
        }
    }
    let mut cost = bounds.to_vec();
    cost.extend_from_slice(bounds);
    match minimize_standard(&a, g, &cost) {
        Ok(s) => Ok(s.value),
        // Dual infeasible means the primal is unbounded.
        Err(Error::Infeasible(_)) => Err(Error::Unbounded),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_standard_form() {
        // min -x - y, x + 2y + s1 = 4, 3x + y + s2 = 6 → optimum at (8/5, 6/5).
        let a = vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]];
        let s = minimize_standard(&a, &[4.0, 6.0], &[-1.0, -1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(s.value, -14.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[0], 1.6, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let a = vec![vec![1.0, 1.0]];
        assert!(matches!(minimize_standard(&a, &[-1.0], &[1.0, 1.0]), Err(Error::Infeasible(_))));
        let a = vec![vec![1.0, -1.0]];
        assert!(matches!(minimize_standard(&a, &[1.0], &[0.0, -1.0]), Err(Error::Unbounded)));
    }

    #[test]
    fn box_constrained_dual() {
        // max c0 + c1 with |c0| ≤ 1, |c1| ≤ 2 → 3.
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_abs_diff_eq!(maximize_box_constrained(&rows, &[1.0, 2.0], &[1.0, 1.0]).unwrap(), 3.0, epsilon = 1e-12);
        // Only one row: c1 is free.
        let rows = vec![vec![1.0, 0.0]];
        assert!(matches!(maximize_box_constrained(&rows, &[1.0], &[1.0, 1.0]), Err(Error::Unbounded)));
    }
}
