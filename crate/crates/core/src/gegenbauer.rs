//! Expansions of zonal kernels f(⟨x,y⟩) on S^{d-1} in normalized Gegenbauer
//! polynomials P_l = C_l^λ / C_l^λ(1), λ = (d-2)/2 (Chebyshev T for d = 2).
//!
//! Nonnegative coefficients (apart from l = 0) are the Schoenberg criterion
//! for conditional positive definiteness, so the sign scans here are sign
//! tests on these coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Result};
use crate::quadrature::{gauss_gegenbauer, gauss_legendre};

/// Normalized Gegenbauer values P_0(t), ..., P_L(t) with P_l(1) = 1.
pub fn normalized_gegenbauer_all(max_degree: usize, lambda: f64, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(max_degree + 1);
    p.push(1.0);
    if max_degree >= 1 {
        p.push(t);
    }
    for n in 1..max_degree {
        let nf = n as f64;
        let next = ((2.0 * nf + 2.0 * lambda) * t * p[n] - nf * p[n - 1]) / (nf + 2.0 * lambda);
        p.push(next);
    }
    p
}

/// P_l(t) for a single degree.
pub fn normalized_gegenbauer(l: usize, lambda: f64, t: f64) -> f64 {
    normalized_gegenbauer_all(l, lambda, t)[l]
}

/// Zonal kernels available to the scans and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZonalKernel {
    /// |t|^p
    AbsPower { p: f64 },
    /// t^k
    Monomial { k: u32 },
    Constant { value: f64 },
    /// P_k itself (orthogonality self-test).
    Gegenbauer { k: usize },
    /// ρ^{-s}/s with ρ = arccos t (-log ρ at s = 0).
    GeodesicRiesz { s: f64 },
}

impl ZonalKernel {
    pub fn eval(&self, t: f64, lambda: f64) -> f64 {
        match *self {
            ZonalKernel::AbsPower { p } => t.abs().powf(p),
            ZonalKernel::Monomial { k } => t.powi(k as i32),
            ZonalKernel::Constant { value } => value,
            ZonalKernel::Gegenbauer { k } => normalized_gegenbauer(k, lambda, t),
            ZonalKernel::GeodesicRiesz { s } => geodesic_profile(s, t.clamp(-1.0, 1.0).acos()),
        }
    }

    /// f(cos θ) sin^{d-2} θ, evaluated without overflow near θ = 0.
    fn weighted(&self, theta: f64, d: usize, lambda: f64) -> f64 {
        let sin_pow = theta.sin().powi(d as i32 - 2);
        match *self {
            ZonalKernel::GeodesicRiesz { s } if s > 0.0 => {
                // θ^{d-2-s} (sin θ/θ)^{d-2} / s
                theta.powf(d as f64 - 2.0 - s) * (theta.sin() / theta).powi(d as i32 - 2) / s
            }
            _ => self.eval(theta.cos(), lambda) * sin_pow,
        }
    }

    /// Whether plain Gauss-Jacobi quadrature converges fast (polynomial or
    /// analytic on [-1, 1]).
    fn is_smooth(&self) -> bool {
        match *self {
            ZonalKernel::AbsPower { p } => p >= 0.0 && p.fract() == 0.0 && (p as i64) % 2 == 0,
            ZonalKernel::Monomial { .. } | ZonalKernel::Constant { .. } | ZonalKernel::Gegenbauer { .. } => true,
            ZonalKernel::GeodesicRiesz { .. } => false,
        }
    }

    /// Non-smooth points in θ with the local exponent of f(cos θ) sin^{d-2}θ.
    fn singularities(&self, d: usize) -> Vec<(f64, f64)> {
        match *self {
            ZonalKernel::AbsPower { p } => vec![(0.5 * PI, p)],
            ZonalKernel::GeodesicRiesz { s } => {
                let beta = d as f64 - 2.0 - s;
                // At s = 0 the logarithm behaves like a tiny negative power.
                vec![(0.0, if s == 0.0 { beta - 0.5 } else { beta })]
            }
            _ => Vec::new(),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        if let ZonalKernel::GeodesicRiesz { s } = *self {
            if !(s < d as f64 - 1.0) {
                return Err(out_of_range(format!("geodesic Riesz kernel with s = {s} is not integrable on S^{}", d - 1)));
            }
        }
        if let ZonalKernel::AbsPower { p } = *self {
            if !(p > -1.0) {
                return Err(out_of_range(format!("|t|^p with p = {p} is not integrable")));
            }
        }
        Ok(())
    }
}

fn geodesic_profile(s: f64, rho: f64) -> f64 {
    if s == 0.0 {
        -rho.ln()
    } else {
        rho.powf(-s) / s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GegenbauerExpansion {
    pub d: usize,
    pub max_degree: usize,
    pub coeffs: Vec<f64>,
    /// Change of each coefficient under node doubling.
    pub coeff_errors: Vec<f64>,
    pub quad_error_estimate: f64,
}

impl GegenbauerExpansion {
    pub fn lambda(&self) -> f64 {
        (self.d as f64 - 2.0) / 2.0
    }

    /// Σ ĉ_l P_l(t).
    pub fn evaluate(&self, t: f64) -> f64 {
        let p = normalized_gegenbauer_all(self.max_degree, self.lambda(), t);
        p.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum()
    }
}

/// Quadrature rule in θ on [0, π] for ∫ g(θ) dθ.
type Rule = (Vec<f64>, Vec<f64>);

/// Gauss rule in the variable t for the weight (1-t²)^{λ-1/2}, mapped to θ
/// nodes; weights absorb the Jacobian so the rule integrates
/// f(cos θ) sin^{d-2}θ dθ when applied to f alone.
fn smooth_coefficients(kernel: &ZonalKernel, d: usize, max_degree: usize, n: usize) -> Vec<f64> {
    let lambda = (d as f64 - 2.0) / 2.0;
    let (t, w) = gauss_gegenbauer(n, lambda - 0.5);
    project(max_degree, lambda, t.iter().zip(&w).map(|(&t, &w)| (t, w * kernel.eval(t, lambda), w)))
}

/// Accumulates ĉ_l = Σ fw P_l / Σ w P_l² over (t, f·w, w) triples.
fn project(max_degree: usize, lambda: f64, samples: impl Iterator<Item = (f64, f64, f64)>) -> Vec<f64> {
    let mut num = vec![0.0; max_degree + 1];
    let mut den = vec![0.0; max_degree + 1];
    for (t, fw, w) in samples {
        let p = normalized_gegenbauer_all(max_degree, lambda, t);
        for l in 0..=max_degree {
            num[l] += fw * p[l];
            den[l] += w * p[l] * p[l];
        }
    }
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

/// Composite Gauss-Legendre rule on [0, π] with power-graded panels at the
/// listed singular points (θ₀, local exponent β).
fn composite_rule(singular: &[(f64, f64)], m: usize, max_width: f64) -> Rule {
    let (gx, gw) = gauss_legendre(m);
    let mut breaks = vec![0.0, PI];
    breaks.extend(singular.iter().map(|s| s.0));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let exponent_at = |x: f64| singular.iter().find(|s| (s.0 - x).abs() < 1e-15).map(|s| s.1);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    // Gauss points on [lo, hi] in u, pushed through θ = map(u).
    let mut push_panel = |lo: f64, hi: f64, map: &dyn Fn(f64) -> (f64, f64)| {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        for (x, w) in gx.iter().zip(&gw) {
            let (theta, jac) = map(c + h * x);
            let wt = w * h * jac;
            if wt > 0.0 && theta > 0.0 && theta < PI {
                nodes.push(theta);
                weights.push(wt);
            }
        }
    };
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = 0.5 * (a + b);
        for (end, other) in [(a, mid), (b, mid)] {
            let len = (other - end).abs();
            let dir = if other > end { 1.0 } else { -1.0 };
            match exponent_at(end) {
                Some(beta) => {
                    // θ = end + dir·len·u^q; q = 1/(β+1) flattens u^β.
                    let q = if beta < 0.0 { 1.0 / (beta + 1.0) } else { 1.0 };
                    let map = |u: f64| (end + dir * len * u.powf(q), len * q * u.powf(q - 1.0));
                    // Geometric grading in u absorbs the remaining
                    // non-integer powers.
                    let sigma: f64 = 0.2;
                    let levels = 22;
                    let mut lo: f64 = 0.0;
                    for k in (0..=levels).rev() {
                        let hi = sigma.powi(k);
                        let pieces = ((len * (hi.powf(q) - lo.powf(q))) / max_width).ceil().max(1.0) as usize;
                        for j in 0..pieces {
                            let p0 = lo + (hi - lo) * j as f64 / pieces as f64;
                            let p1 = lo + (hi - lo) * (j + 1) as f64 / pieces as f64;
                            push_panel(p0, p1, &map);
                        }
                        lo = hi;
                    }
                }
                None => {
                    let pieces = (len / max_width).ceil().max(1.0) as usize;
                    let map = |u: f64| (end + dir * len * u, len);
                    for j in 0..pieces {
                        push_panel(j as f64 / pieces as f64, (j + 1) as f64 / pieces as f64, &map);
                    }
                }
            }
        }
    }
    (nodes, weights)
}

fn composite_coefficients(kernel: &ZonalKernel, d: usize, max_degree: usize, m: usize) -> Vec<f64> {
    let lambda = (d as f64 - 2.0) / 2.0;
    let max_width = (2.0 * PI / (max_degree as f64 + 1.0)).min(0.25);
    let (theta, w) = composite_rule(&kernel.singularities(d), m, max_width);
    project(
        max_degree,
        lambda,
        theta.iter().zip(&w).map(|(&th, &w)| {
            let sin_pow = th.sin().powi(d as i32 - 2);
            (th.cos(), w * kernel.weighted(th, d, lambda), w * sin_pow)
        }),
    )
}

/// Coefficients ĉ_0..ĉ_L of `kernel` on S^{d-1}: Gauss-Jacobi quadrature for
/// smooth kernels, graded composite quadrature otherwise; the error
/// estimate compares against a rule with twice the nodes.
pub fn gegenbauer_coefficients(kernel: &ZonalKernel, d: usize, max_degree: usize) -> Result<GegenbauerExpansion> {
    if d < 2 {
        return Err(out_of_range(format!("dimension d = {d} must be at least 2")));
    }
    kernel.check(d)?;
    let (coarse, fine) = if kernel.is_smooth() {
        let n = (4 * (max_degree + 1)).max(64);
        (smooth_coefficients(kernel, d, max_degree, n), smooth_coefficients(kernel, d, max_degree, 2 * n))
    } else {
        (composite_coefficients(kernel, d, max_degree, 20), composite_coefficients(kernel, d, max_degree, 40))
    };
    let scale = fine.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let floor = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let coeff_errors: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs().max(floor)).collect();
    let quad_error_estimate = coeff_errors.iter().fold(0.0f64, |a, &e| a.max(e));
    Ok(GegenbauerExpansion { d, max_degree, coeffs: fine, coeff_errors, quad_error_estimate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityScan {
    /// First l ≥ 1 with ĉ_l < -10 × error estimate.
    pub first_negative: Option<usize>,
    /// Degrees (before the first negative one) with ĉ_l slightly below zero
    /// but within ten error estimates.
    pub indeterminate: Vec<usize>,
    pub expansion: GegenbauerExpansion,
}

/// Scans ĉ_1, ..., ĉ_L for a clearly negative coefficient. ĉ_0 is skipped:
/// adding a constant does not affect which probability measure minimizes
/// the energy.
pub fn first_negative_index(kernel: &ZonalKernel, d: usize, max_degree: usize) -> Result<NegativityScan> {
    let expansion = gegenbauer_coefficients(kernel, d, max_degree)?;
    let err = expansion.quad_error_estimate;
    let mut first_negative = None;
    let mut indeterminate = Vec::new();
    for l in 1..=max_degree {
        let c = expansion.coeffs[l];
        if c < -10.0 * err {
            first_negative = Some(l);
            break;
        }
        if c < -err {
            indeterminate.push(l);
        }
    }
    Ok(NegativityScan { first_negative, indeterminate, expansion })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignScanRow {
    pub s: f64,
    pub first_negative: Option<usize>,
    pub indeterminate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicScan {
    pub d: usize,
    pub max_degree: usize,
    pub rows: Vec<SignScanRow>,
    /// Maximal runs of consecutive grid values with no negative coefficient.
    pub nonnegative_runs: Vec<(f64, f64)>,
    /// The longest such run.
    pub largest_interval: Option<(f64, f64)>,
}

/// Sign test of the geodesic Riesz kernel ρ^{-s}/s on S^{d-1} for every s in
/// `s_grid` (sorted ascending in the output).
pub fn geodesic_riesz_sign_scan(d: usize, s_grid: &[f64], max_degree: usize) -> Result<GeodesicScan> {
    let mut grid = s_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let rows = grid
        .iter()
        .map(|&s| {
            let scan = first_negative_index(&ZonalKernel::GeodesicRiesz { s }, d, max_degree)?;
            Ok(SignScanRow { s, first_negative: scan.first_negative, indeterminate: scan.indeterminate })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = f64::NAN;
    for row in &rows {
        if row.first_negative.is_none() {
            start.get_or_insert(row.s);
            last = row.s;
        } else if let Some(a) = start.take() {
            runs.push((a, last));
        }
    }
    if let Some(a) = start {
        runs.push((a, last));
    }
    let largest_interval = runs.iter().copied().max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)));
    Ok(GeodesicScan { d, max_degree, rows, nonnegative_runs: runs, largest_interval })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chebyshev_limit_and_legendre() {
        // d = 2 gives Chebyshev T.
        for &t in &[-0.7, 0.1, 0.9] {
            let p = normalized_gegenbauer_all(6, 0.0, t);
            for (l, v) in p.iter().enumerate() {
                assert_abs_diff_eq!(*v, (l as f64 * t.acos()).cos(), epsilon = 1e-13);
            }
            let p2 = 0.5 * (3.0 * t * t - 1.0);
            assert_abs_diff_eq!(normalized_gegenbauer(2, 0.5, t), p2, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(normalized_gegenbauer(9, 2.5, 1.0), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn linear_and_quadratic_kernels() {
        let e = gegenbauer_coefficients(&ZonalKernel::Monomial { k: 1 }, 3, 6).unwrap();
        for (l, c) in e.coeffs.iter().enumerate() {
            if l == 1 {
                assert_abs_diff_eq!(*c, 1.0, epsilon = 1e-13);
            } else {
                assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-13);
            }
        }
        let e = gegenbauer_coefficients(&ZonalKernel::Monomial { k: 2 }, 3, 2).unwrap();
        assert_abs_diff_eq!(e.coeffs[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.coeffs[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.coeffs[2], 2.0 / 3.0, epsilon = 1e-12);
        // The composite route agrees on the same polynomial.
        let c = composite_coefficients(&ZonalKernel::Monomial { k: 2 }, 3, 2, 20);
        assert_abs_diff_eq!(c[2], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonality_self_test() {
        for d in [2usize, 3, 4, 6] {
            let lmax = 12;
            for k in 0..=lmax / 2 {
                let e = gegenbauer_coefficients(&ZonalKernel::Gegenbauer { k }, d, lmax).unwrap();
                for (l, c) in e.coeffs.iter().enumerate() {
                    let want = if l == k { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(*c, want, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn reconstruction_of_polynomials() {
        for (kernel, d) in [(ZonalKernel::Monomial { k: 5 }, 3), (ZonalKernel::AbsPower { p: 4.0 }, 5), (ZonalKernel::Monomial { k: 3 }, 2)] {
            let e = gegenbauer_coefficients(&kernel, d, 8).unwrap();
            let lambda = e.lambda();
            let worst = (0..=200)
                .map(|k| -1.0 + 2.0 * k as f64 / 200.0)
                .map(|t| (kernel.eval(t, lambda) - e.evaluate(t)).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 10.0 * e.quad_error_estimate, "{kernel:?}: {worst} vs {}", e.quad_error_estimate);
        }
    }

    #[test]
    fn constant_kernel_has_only_c0() {
        let e = gegenbauer_coefficients(&ZonalKernel::Constant { value: 2.5 }, 4, 10).unwrap();
        assert_abs_diff_eq!(e.coeffs[0], 2.5, epsilon = 1e-13);
        assert!(e.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn abs_power_sign_structure() {
        let scan = first_negative_index(&ZonalKernel::AbsPower { p: 4.0 }, 3, 20).unwrap();
        assert_eq!(scan.first_negative, None);
        let cubic = gegenbauer_coefficients(&ZonalKernel::AbsPower { p: 3.0 }, 3, 12).unwrap();
        assert!((4..=12).step_by(2).any(|l| cubic.coeffs[l] < 0.0));
        let scan = first_negative_index(&ZonalKernel::AbsPower { p: 2.5 }, 3, 40).unwrap();
        let l = scan.first_negative.expect("negative coefficient");
        assert_eq!(l % 2, 0);
    }

    #[test]
    fn composite_estimate_bounds_refinement() {
        // Doubling the nodes again moves coefficients by less than the
        // reported estimate.
        let k = ZonalKernel::AbsPower { p: 2.5 };
        let e = gegenbauer_coefficients(&k, 3, 20).unwrap();
        let finer = composite_coefficients(&k, 3, 20, 80);
        for (a, b) in e.coeffs.iter().zip(&finer) {
            assert!((a - b).abs() <= e.quad_error_estimate.max(1e-15));
        }
    }

    #[test]
    fn geodesic_kernel_matches_adaptive_quadrature() {
        // ĉ_0 of ρ^{-s}/s on S² is ∫_0^π θ^{-s} sinθ dθ / (2s).
        for s in [0.5, 1.5, -0.7] {
            let e = gegenbauer_coefficients(&ZonalKernel::GeodesicRiesz { s }, 3, 4).unwrap();
            let (v, _) = crate::quadrature::integrate(|t: f64| t.powf(-s) * t.sin(), 0.0, PI, 1e-14, 1e-13).unwrap();
            assert_abs_diff_eq!(e.coeffs[0], v / (2.0 * s), epsilon = 1e-10);
        }
        assert!(gegenbauer_coefficients(&ZonalKernel::GeodesicRiesz { s: 2.0 }, 3, 4).is_err());
    }

    #[test]
    fn geodesic_scan_reports_runs() {
        let scan = geodesic_riesz_sign_scan(3, &[-1.0, -0.5, 0.5, 1.0], 16).unwrap();
        assert_eq!(scan.rows.len(), 4);
        assert!(scan.largest_interval.is_some() || scan.rows.iter().all(|r| r.first_negative.is_some()));
    }
}
