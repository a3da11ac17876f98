//! Minimal logarithmic and Riesz-2 energies on S², asymptotic-coefficient
//! fits, and the associated closed-form constants.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, out_of_range, Error, Result};
use crate::model::{energy_flat, Domain, EnergyMode, KernelSpec};
use crate::optim::{minimize, DescentOptions, PointsIn};
use crate::rng::task_rng;
use crate::special::{stieltjes_gamma1, EULER_GAMMA};

/// `2 log 2 + (1/2) log(2/3) + 3 log(√π / Γ(1/3))`, the conjectured
/// coefficient of N in the minimal log energy on S².
pub fn constant_cbhs() -> f64 {
    2.0 * LN_2 + 0.5 * (2.0f64 / 3.0).ln() + 1.5 * PI.ln() - 3.0 * ln_gamma(1.0 / 3.0)
}

/// The proven lower bound `log 2 - 3/4` for the same coefficient.
pub fn log_constant_lower_bound() -> f64 {
    LN_2 - 0.75
}

/// F(c) = (log 2)/2 - γ/2 - (log c)/2 - 1/(4c).
pub fn f_lower_bound(c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(out_of_range(format!("F(c) needs c > 0, got {c}")));
    }
    Ok(0.5 * LN_2 - 0.5 * EULER_GAMMA - 0.5 * c.ln() - 0.25 / c)
}

/// F'(c) = -1/(2c) + 1/(4c²).
pub fn f_derivative(c: f64) -> f64 {
    -0.5 / c + 0.25 / (c * c)
}

/// Maximizer of F by Newton iteration on F'. Returns `(c*, F(c*))`.
pub fn maximize_f() -> Result<(f64, f64)> {
    let mut c: f64 = 0.3;
    for _ in 0..100 {
        let f2 = 0.5 / (c * c) - 0.5 / (c * c * c);
        let step = f_derivative(c) / f2;
        let next = c - step;
        // Keep the iterate in (0, ∞).
        c = if next > 0.0 { next } else { 0.5 * c };
        if step.abs() <= 1e-16 * c {
            break;
        }
    }
    Ok((c, f_lower_bound(c)?))
}

/// `(1/4)(γ - log(2√3 π)) + (√3/(4π))(γ₁(2/3) - γ₁(1/3))`, the conjectured
/// coefficient of N² in the minimal Riesz 2-energy on S².
pub fn constant_c22() -> Result<f64> {
    let g = stieltjes_gamma1(2.0 / 3.0)? - stieltjes_gamma1(1.0 / 3.0)?;
    Ok(0.25 * (EULER_GAMMA - (2.0 * 3f64.sqrt() * PI).ln()) + 3f64.sqrt() / (4.0 * PI) * g)
}

/// `C_BHS - 2 C_{2,2} - (log 2 - γ)`, zero by the known identity.
pub fn c22_identity_residual() -> Result<f64> {
    Ok(constant_cbhs() - 2.0 * constant_c22()? - (LN_2 - EULER_GAMMA))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereKernel {
    /// Σ_{i≠j} log(1/|x_i - x_j|)
    Log,
    /// Σ_{i≠j} |x_i - x_j|^{-2}
    Riesz2,
}

impl SphereKernel {
    fn spec(self) -> (KernelSpec, f64) {
        match self {
            SphereKernel::Log => (KernelSpec::Log, 1.0),
            // The model kernel is 1/(s r^s); the table sums plain r^{-2}.
            SphereKernel::Riesz2 => (KernelSpec::Riesz { s: 2.0 }, 2.0),
        }
    }
}

/// Raw pair sum of `kernel` over points on S² (flat xyz buffer). Fills the
/// ambient gradient when `grad` is given.
pub fn sphere_energy(kernel: SphereKernel, coords: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
    let (spec, scale) = kernel.spec();
    let ones = vec![1.0; coords.len() / 3];
    let mut grad = grad;
    let e = energy_flat(3, coords, &ones, &spec, None, EnergyMode::RawSum, grad.as_deref_mut())?;
    if let Some(g) = grad {
        g.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(scale * e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { restarts: 8, seed: 0, max_iter: 20_000, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub n: usize,
    pub best_energy: f64,
    pub restarts_used: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub kernel: SphereKernel,
    pub rows: Vec<EnergyRow>,
}

impl EnergyTable {
    /// Folds in rows from further restarts: per N the lower energy is kept
    /// and restart counts add up. Rows stay sorted by N.
    pub fn merge(&mut self, other: &EnergyTable) -> Result<()> {
        if other.kernel != self.kernel {
            return Err(invalid("cannot merge tables of different kernels"));
        }
        for row in &other.rows {
            match self.rows.iter_mut().find(|r| r.n == row.n) {
                Some(r) => {
                    if row.best_energy < r.best_energy {
                        r.best_energy = row.best_energy;
                        r.grad_norm = row.grad_norm;
                    }
                    r.restarts_used += row.restarts_used;
                }
                None => self.rows.push(*row),
            }
        }
        self.rows.sort_by_key(|r| r.n);
        Ok(())
    }
}

/// N independent uniform points on S².
pub fn random_sphere_points(n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut x = Vec::with_capacity(3 * n);
    for _ in 0..n {
        loop {
            let p: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if r > 1e-8 {
                x.extend(p.iter().map(|v| v / r));
                break;
            }
        }
    }
    x
}

/// Local minimization of the raw energy on S² from `x` (modified in place).
/// Returns the energy and the final tangent-gradient norm.
pub fn relax_on_sphere(kernel: SphereKernel, x: &mut Vec<f64>, max_iter: usize, tol: f64) -> Result<(f64, f64)> {
    let n = x.len() / 3;
    let cons = PointsIn::new(Domain::Sphere { dim: 3, radius: 1.0 });
    let opts = DescentOptions { max_iter, tol, initial_step: 1.0 / (n as f64).max(2.0), ..Default::default() };
    let rep = minimize(x, |c, g| sphere_energy(kernel, c, Some(g)), &cons, &opts)?;
    Ok((rep.value, rep.stationarity))
}

const TABLE_STREAM: u64 = 0x5f_7ab1e;

/// Best local minimum of the raw energy over `opts.restarts` random starts
/// for every N in `n_list`. Restarts run on the current rayon pool; each is
/// seeded from `(seed, N, restart)` so the result does not depend on the
/// number of workers.
pub fn minimal_energy_table(kernel: SphereKernel, n_list: &[usize], opts: &TableOptions) -> Result<EnergyTable> {
    if n_list.iter().any(|&n| n < 2) {
        return Err(out_of_range("every N must be at least 2"));
    }
    if opts.restarts == 0 {
        return Err(out_of_range("restarts must be positive"));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let tasks: Vec<(usize, usize)> = ns.iter().flat_map(|&n| (0..opts.restarts).map(move |r| (n, r))).collect();
    let runs: Vec<Result<(f64, f64)>> = tasks
        .par_iter()
        .map(|&(n, r)| {
            let mut rng = task_rng(opts.seed, TABLE_STREAM ^ n as u64, r as u64);
            let mut x = random_sphere_points(n, &mut rng);
            relax_on_sphere(kernel, &mut x, opts.max_iter, opts.tol)
        })
        .collect();
    let mut rows = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let mut best: Option<(f64, f64)> = None;
        for run in &runs[k * opts.restarts..(k + 1) * opts.restarts] {
            let (e, g) = match run {
                Ok(v) => *v,
                Err(e) => return Err(e.clone()),
            };
            if best.is_none_or(|b| e < b.0) {
                best = Some((e, g));
            }
        }
        let (best_energy, grad_norm) = best.expect("restarts > 0");
        rows.push(EnergyRow { n, best_energy, restarts_used: opts.restarts, grad_norm });
    }
    Ok(EnergyTable { kernel, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionModel {
    /// (1/2 - log 2) N² - (1/2) N log N + C_log N
    LogExpansion,
    /// (1/4) N² log N + C_22 N²
    Riesz2Expansion,
}

impl ExpansionModel {
    pub fn for_kernel(kernel: SphereKernel) -> Self {
        match kernel {
            SphereKernel::Log => ExpansionModel::LogExpansion,
            SphereKernel::Riesz2 => ExpansionModel::Riesz2Expansion,
        }
    }
}

/// Extra column fitted next to the open coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTerm {
    None,
    Constant,
    LogN,
    SqrtN,
    /// N for the log model, N log N for the Riesz-2 model.
    NextOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub probe: ProbeTerm,
    /// Fit the leading coefficients too instead of pinning them (diagnostic).
    pub free_leading: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { probe: ProbeTerm::None, free_leading: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ExpansionModel,
    pub fitted: BTreeMap<String, f64>,
    pub fixed: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub window: (usize, usize),
    pub e_jel_derived: Option<f64>,
}

impl FitResult {
    /// The open coefficient (C_log or C_22).
    pub fn constant(&self) -> f64 {
        let key = match self.model {
            ExpansionModel::LogExpansion => "C_log",
            ExpansionModel::Riesz2Expansion => "C_22",
        };
        self.fitted[key]
    }
}

/// Least-squares fit of the asymptotic expansion to the rows of `table`
/// with `window.0 <= N <= window.1`.
pub fn fit_expansion(table: &EnergyTable, window: (usize, usize), opts: &FitOptions) -> Result<FitResult> {
    let model = ExpansionModel::for_kernel(table.kernel);
    let rows: Vec<&EnergyRow> = table.rows.iter().filter(|r| r.n >= window.0 && r.n <= window.1).collect();
    type Column = (&'static str, fn(f64) -> f64);
    let (leading, open, next): (Vec<(Column, f64)>, Column, Column) = match model {
        ExpansionModel::LogExpansion => (
            vec![(("N^2", |n| n * n), 0.5 - LN_2), (("N log N", |n| n * n.ln()), -0.5)],
            ("C_log", |n| n),
            ("N^0", |_| 1.0),
        ),
        ExpansionModel::Riesz2Expansion => (
            vec![(("N^2 log N", |n| n * n * n.ln()), 0.25)],
            ("C_22", |n| n * n),
            ("N log N", |n| n * n.ln()),
        ),
    };
    let mut columns: Vec<Column> = vec![open];
    match opts.probe {
        ProbeTerm::None => {}
        ProbeTerm::Constant => columns.push(("probe_const", |_| 1.0)),
        ProbeTerm::LogN => columns.push(("probe_log_n", |n| n.ln())),
        ProbeTerm::SqrtN => columns.push(("probe_sqrt_n", |n| n.sqrt())),
        ProbeTerm::NextOrder => columns.push((next.0, next.1)),
    }
    let mut fixed = BTreeMap::new();
    let mut pinned: Vec<(Column, f64)> = Vec::new();
    for (col, value) in leading {
        if opts.free_leading {
            columns.push(col);
        } else {
            fixed.insert(col.0.to_string(), value);
            pinned.push((col, value));
        }
    }
    if rows.len() < 3 || rows.len() < columns.len() {
        return Err(invalid(format!("window {window:?} holds {} rows; need at least {}", rows.len(), columns.len().max(3))));
    }
    let m = rows.len();
    let k = columns.len();
    let mut a = DMatrix::<f64>::zeros(m, k);
    let mut y = DVector::<f64>::zeros(m);
    for (i, row) in rows.iter().enumerate() {
        let n = row.n as f64;
        y[i] = row.best_energy - pinned.iter().map(|((_, f), v)| v * f(n)).sum::<f64>();
        for (j, (_, f)) in columns.iter().enumerate() {
            a[(i, j)] = f(n);
        }
    }
    // Column scaling keeps N² and N^0 columns comparable.
    let scales: Vec<f64> = (0..k).map(|j| a.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    for j in 0..k {
        a.column_mut(j).scale_mut(1.0 / scales[j]);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::IllConditioned(smax / smin));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| invalid(e.to_string()))?;
    let resid = &y - &a * &coef;
    let residual_rms = (resid.norm_squared() / m as f64).sqrt();
    let mut fitted = BTreeMap::new();
    for (j, (name, _)) in columns.iter().enumerate() {
        fitted.insert(name.to_string(), coef[j] / scales[j]);
    }
    let e_jel_derived = match model {
        ExpansionModel::LogExpansion => Some((fitted["C_log"] - 0.5 * (4.0 * PI).ln()) / 2.0),
        ExpansionModel::Riesz2Expansion => None,
    };
    Ok(FitResult { model, fitted, fixed, residual_rms, window, e_jel_derived })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constants_match_reference_digits() {
        assert_abs_diff_eq!(constant_cbhs(), -0.055_605_304_943_392_518_50, epsilon = 1e-14);
        assert_abs_diff_eq!(log_constant_lower_bound(), -0.056_852_819_440_054_69, epsilon = 1e-15);
        assert!(log_constant_lower_bound() < constant_cbhs());
    }

    #[test]
    fn f_has_its_maximum_at_one_half() {
        let (c, f) = maximize_f().unwrap();
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f, -0.095_460_651_890_821_12, epsilon = 1e-14);
        assert_abs_diff_eq!(f_derivative(0.5), 0.0, epsilon = 1e-14);
        let direct = LN_2 / 2.0 - EULER_GAMMA / 2.0 - 0.25;
        assert_abs_diff_eq!(f_lower_bound(1.0).unwrap(), direct, epsilon = 1e-14);
        assert!(f_lower_bound(0.0).is_err());
    }

    #[test]
    fn c22_identity() {
        let c22 = constant_c22().unwrap();
        assert_abs_diff_eq!(c22, -0.085_768_410_300_902_483_66, epsilon = 1e-10);
        assert!(c22 < 0.0);
        assert!(c22_identity_residual().unwrap().abs() < 1e-8);
    }

    #[test]
    fn small_n_minima() {
        let opts = TableOptions { restarts: 4, seed: 7, ..Default::default() };
        let t = minimal_energy_table(SphereKernel::Log, &[2, 3, 4], &opts).unwrap();
        let expected = [-2.0 * LN_2, -3.0 * 3f64.ln(), -6.0 * (8.0f64 / 3.0).ln()];
        for (row, e) in t.rows.iter().zip(expected) {
            assert_abs_diff_eq!(row.best_energy, e, epsilon = 1e-8);
        }
    }

    #[test]
    fn merge_keeps_the_lower_energy() {
        let mut a = EnergyTable { kernel: SphereKernel::Log, rows: vec![EnergyRow { n: 5, best_energy: -1.0, restarts_used: 2, grad_norm: 0.0 }] };
        let b = EnergyTable {
            kernel: SphereKernel::Log,
            rows: vec![
                EnergyRow { n: 5, best_energy: -0.5, restarts_used: 3, grad_norm: 0.0 },
                EnergyRow { n: 4, best_energy: -2.0, restarts_used: 1, grad_norm: 0.0 },
            ],
        };
        a.merge(&b).unwrap();
        assert_eq!(a.rows[0].n, 4);
        assert_eq!(a.rows[1].best_energy, -1.0);
        assert_eq!(a.rows[1].restarts_used, 5);
    }

    fn synthetic(kernel: SphereKernel, c: f64, extra: f64) -> EnergyTable {
        let rows = (10..=200)
            .step_by(10)
            .map(|n| {
                let nf = n as f64;
                let e = match kernel {
                    SphereKernel::Log => (0.5 - LN_2) * nf * nf - 0.5 * nf * nf.ln() + c * nf + extra,
                    SphereKernel::Riesz2 => 0.25 * nf * nf * nf.ln() + c * nf * nf + extra,
                };
                EnergyRow { n, best_energy: e, restarts_used: 1, grad_norm: 0.0 }
            })
            .collect();
        EnergyTable { kernel, rows }
    }

    #[test]
    fn exact_model_is_recovered() {
        for kernel in [SphereKernel::Log, SphereKernel::Riesz2] {
            let fit = fit_expansion(&synthetic(kernel, -0.0556, 0.0), (20, 200), &FitOptions::default()).unwrap();
            assert_abs_diff_eq!(fit.constant(), -0.0556, epsilon = 1e-12);
            assert!(fit.residual_rms < 1e-10);
        }
        let fit = fit_expansion(
            &synthetic(SphereKernel::Log, -0.0556, 0.7),
            (20, 200),
            &FitOptions { probe: ProbeTerm::Constant, free_leading: true },
        )
        .unwrap();
        assert_abs_diff_eq!(fit.constant(), -0.0556, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.fitted["probe_const"], 0.7, epsilon = 1e-6);
        let e = fit.e_jel_derived.unwrap();
        assert_abs_diff_eq!(2.0 * e + 0.5 * (4.0 * PI).ln(), fit.constant(), epsilon = 1e-14);
    }

    #[test]
    fn tiny_window_is_rejected() {
        let t = synthetic(SphereKernel::Log, 0.0, 0.0);
        assert!(fit_expansion(&t, (10, 20), &FitOptions::default()).is_err());
    }
}
