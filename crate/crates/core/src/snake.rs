//! Snake polynomials: the degree-n polynomial oscillating most between ±μ,
//! together with the Markov and Duffin-Schaeffer type extremal quantities.
//!
//! Zeros of the majorant are factored out first. If μ vanishes at the points
//! Z, every admissible polynomial has the form ω = F q with F = Π_{z∈Z}(x − z),
//! and q is the weighted Chebyshev polynomial for ν = μ/|F|, computed by a
//! Remez exchange. The zeros of F are touch points of both signs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_range, Error, Result};
use crate::lp::maximize_box_constrained;
use crate::quadrature::golden_min;

/// Nonnegative continuous majorant on [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Majorant {
    One,
    AbsX,
    /// √(1 − x²)
    Semicircle,
    /// 1 − x²
    Parabola,
    /// √(2x² + x + 1)
    SqrtQuadratic,
    /// |1 − 2x²|
    AbsQuadratic,
    /// Linear interpolation of (x, μ(x)) samples covering [-1, 1].
    Sampled { points: Vec<(f64, f64)> },
}

impl Majorant {
    /// The six closed-form members.
    pub fn catalog() -> Vec<Majorant> {
        vec![
            Majorant::One,
            Majorant::AbsX,
            Majorant::Semicircle,
            Majorant::Parabola,
            Majorant::SqrtQuadratic,
            Majorant::AbsQuadratic,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Majorant::One => "one",
            Majorant::AbsX => "abs_x",
            Majorant::Semicircle => "semicircle",
            Majorant::Parabola => "parabola",
            Majorant::SqrtQuadratic => "sqrt_quadratic",
            Majorant::AbsQuadratic => "abs_quadratic",
            Majorant::Sampled { .. } => "sampled",
        }
    }

    /// Samples of `f` on an `n`-point Chebyshev grid.
    pub fn sampled_from(f: impl Fn(f64) -> f64, n: usize) -> Majorant {
        let points = chebyshev_grid(n).into_iter().rev().map(|x| (x, f(x))).collect();
        Majorant::Sampled { points }
    }

    pub fn validate(&self) -> Result<()> {
        if let Majorant::Sampled { points } = self {
            if points.len() < 2 {
                return Err(invalid("sampled majorant needs at least two points"));
            }
            if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(invalid("sampled majorant abscissae must be strictly increasing"));
            }
            if points[0].0 > -1.0 || points[points.len() - 1].0 < 1.0 {
                return Err(invalid("sampled majorant must cover [-1, 1]"));
            }
            if points.iter().any(|p| !(p.1 >= 0.0) || !p.1.is_finite()) {
                return Err(invalid("sampled majorant values must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Majorant::One => 1.0,
            Majorant::AbsX => x.abs(),
            Majorant::Semicircle => (1.0 - x * x).max(0.0).sqrt(),
            Majorant::Parabola => 1.0 - x * x,
            Majorant::SqrtQuadratic => (2.0 * x * x + x + 1.0).sqrt(),
            Majorant::AbsQuadratic => (1.0 - 2.0 * x * x).abs(),
            Majorant::Sampled { points } => {
                let k = points.partition_point(|p| p.0 <= x).clamp(1, points.len() - 1);
                let (x0, y0) = points[k - 1];
                let (x1, y1) = points[k];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Zeros in [-1, 1] that every admissible polynomial must share.
    pub fn zeros(&self) -> Vec<f64> {
        let h = 0.5f64.sqrt();
        match self {
            Majorant::AbsX => vec![0.0],
            Majorant::Semicircle | Majorant::Parabola => vec![-1.0, 1.0],
            Majorant::AbsQuadratic => vec![-h, h],
            _ => Vec::new(),
        }
    }

    /// ν = μ/|F| in closed form (may be +∞ at ±1).
    fn reduced(&self, x: f64) -> f64 {
        match self {
            Majorant::One | Majorant::AbsX | Majorant::Parabola => 1.0,
            Majorant::Semicircle => 1.0 / (1.0 - x * x).max(0.0).sqrt(),
            Majorant::AbsQuadratic => 2.0,
            _ => self.eval(x),
        }
    }
}

/// `n` Chebyshev extrema cos(iπ/(n-1)), descending from 1 to -1.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| {
            // Exact 0 in the middle of odd grids.
            if 2 * i + 1 == n {
                0.0
            } else {
                (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
            }
        })
        .collect()
}

/// T_0(x), ..., T_n(x).
pub fn chebyshev_t_all(n: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    if n >= 1 {
        t.push(x);
    }
    for k in 1..n {
        t.push(2.0 * x * t[k] - t[k - 1]);
    }
    t
}

/// Σ a_j T_j(x).
pub fn cheb_eval(a: &[f64], x: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    chebyshev_t_all(a.len() - 1, x).iter().zip(a).map(|(t, c)| t * c).sum()
}

/// Chebyshev coefficients of the k-th derivative.
pub fn cheb_derivative(a: &[f64], k: usize) -> Vec<f64> {
    let mut c = a.to_vec();
    for _ in 0..k {
        let n = c.len();
        if n <= 1 {
            return vec![0.0];
        }
        let mut d = vec![0.0; n - 1];
        for j in (0..n - 1).rev() {
            let next = if j + 2 < n - 1 { d[j + 2] } else { 0.0 };
            d[j] = next + 2.0 * (j + 1) as f64 * c[j + 1];
        }
        d[0] *= 0.5;
        c = d;
    }
    c
}

/// Coefficients of (x − z) Σ a_j T_j, using x T_j = (T_{j+1} + T_{|j−1|})/2.
fn cheb_mul_linear(a: &[f64], z: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + 1];
    for (j, &c) in a.iter().enumerate() {
        if j == 0 {
            out[1] += c;
        } else {
            out[j + 1] += 0.5 * c;
            out[j - 1] += 0.5 * c;
        }
        out[j] -= z * c;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnakeOptions {
    /// Points of the search grid for exchange candidates.
    pub grid_size: usize,
    pub max_exchanges: usize,
    /// Relative spread of the extremal errors at which the exchange stops.
    pub tol: f64,
    /// Shift of the initial reference (uniqueness checks).
    pub perturb: f64,
}

impl Default for SnakeOptions {
    fn default() -> Self {
        SnakeOptions { grid_size: 2001, max_exchanges: 100, tol: 1e-13, perturb: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnakePolynomial {
    pub majorant: Majorant,
    pub degree: usize,
    /// a_0..a_n in the Chebyshev-T basis, leading coefficient positive.
    pub cheb_coeffs: Vec<f64>,
    /// τ*_0 ≥ τ*_1 ≥ ... ≥ τ*_n with ω(τ*_i) = (−1)^i μ(τ*_i).
    pub alternation_points: Vec<f64>,
    pub equioscillation_residual: f64,
    /// A zero of μ coincides with an alternation point of the reduced
    /// problem and is listed twice (double touch).
    pub degenerate: bool,
    pub exchanges: usize,
}

impl SnakePolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        cheb_eval(&self.cheb_coeffs, x)
    }
}

/// Grid-argmax of |e| per sign run, refined by golden section between the
/// neighbouring grid nodes. Returns alternating (x, e(x)) in descending x.
fn signed_extrema(e: &dyn Fn(f64) -> f64, grid: &[f64]) -> Vec<(f64, f64)> {
    let vals: Vec<f64> = grid.iter().map(|&x| e(x)).collect();
    let mut runs: Vec<(usize, f64)> = Vec::new();
    let mut run_sign = 0.0;
    for (k, &v) in vals.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if s != run_sign {
            runs.push((k, v));
            run_sign = s;
        } else if let Some(last) = runs.last_mut() {
            if v.abs() > last.1.abs() {
                *last = (k, v);
            }
        }
    }
    runs.into_iter()
        .map(|(k, v)| {
            let lo = grid[(k + 1).min(grid.len() - 1)];
            let hi = grid[k.saturating_sub(1)];
            let s = v.signum();
            let (x, neg) = golden_min(|x| -s * e(x), lo, hi, 1e-15);
            let best = if -neg > s * v { (x, e(x)) } else { (grid[k], v) };
            // Keep the ends when the extremum sits on them.
            [grid[0], grid[grid.len() - 1]]
                .into_iter()
                .filter(|&b| (b - best.0).abs() <= (hi - lo))
                .map(|b| (b, e(b)))
                .fold(best, |acc, c| if s * c.1 > s * acc.1 { c } else { acc })
        })
        .collect()
}

/// Weighted Chebyshev polynomial of degree m for the majorant ν: returns
/// Chebyshev coefficients of q with |q| ≤ ν and m + 1 alternations, the
/// reference points, and the number of exchanges.
fn remez(nu: &dyn Fn(f64) -> f64, m: usize, zeros: &[f64], opts: &SnakeOptions) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let w = |x: f64| {
        let v = nu(x);
        if v.is_infinite() {
            0.0
        } else {
            1.0 / v
        }
    };
    let grid = chebyshev_grid(opts.grid_size.max(2 * m + 3) | 1);
    if m == 0 {
        // Constant snake at the smallest value of ν. When ν is flat, the
        // touch point is taken as far from the zeros of μ as possible.
        let wmax = grid.iter().map(|&x| w(x)).fold(0.0, f64::max);
        let gap = |x: f64| zeros.iter().map(|z| (x - z).abs()).fold(f64::INFINITY, f64::min);
        let x = grid
            .iter()
            .copied()
            .filter(|&x| w(x) >= wmax * (1.0 - 1e-12))
            .fold(f64::NAN, |best, x| if best.is_nan() || gap(x) > gap(best) { x } else { best });
        let (xr, er) = golden_min(|t| -w(t), (x - 1e-3f64).max(-1.0), (x + 1e-3f64).min(1.0), 1e-15);
        let (x, e) = if -er > w(x) * (1.0 + 1e-12) { (xr, -er) } else { (x, w(x)) };
        return Ok((vec![1.0 / e], vec![x], 0));
    }
    let endpoints_dead = w(1.0) == 0.0 || w(-1.0) == 0.0;
    let mut reference: Vec<f64> = (0..=m)
        .map(|i| {
            let theta = if endpoints_dead {
                std::f64::consts::PI * (2 * i + 1) as f64 / (2 * (m + 1)) as f64
            } else {
                std::f64::consts::PI * i as f64 / m as f64
            };
            (theta + opts.perturb * (i as f64 + 0.5).sin()).cos()
        })
        .collect();
    reference.sort_by(|a, b| b.total_cmp(a));
    let mut coeffs = vec![0.0; m + 1];
    let mut level = 0.0;
    for exchange in 0..opts.max_exchanges {
        // w_i (T_m + Σ_{j<m} c_j T_j)(x_i) = (−1)^i E
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut b = DVector::<f64>::zeros(m + 1);
        for (i, &x) in reference.iter().enumerate() {
            let t = chebyshev_t_all(m, x);
            let wi = w(x);
            for j in 0..m {
                a[(i, j)] = wi * t[j];
            }
            a[(i, m)] = -if i % 2 == 0 { 1.0 } else { -1.0 };
            b[i] = -wi * t[m];
        }
        let sol = a.lu().solve(&b).ok_or(Error::IllConditioned(f64::INFINITY))?;
        coeffs[..m].copy_from_slice(&sol.as_slice()[..m]);
        coeffs[m] = 1.0;
        level = sol[m];
        let err = |x: f64| w(x) * cheb_eval(&coeffs, x);
        let mut ext = signed_extrema(&err, &grid);
        if ext.len() < m + 1 {
            return Err(Error::NoConvergence { iterations: exchange, residual: f64::NAN });
        }
        while ext.len() > m + 1 {
            if ext[0].1.abs() < ext[ext.len() - 1].1.abs() {
                ext.remove(0);
            } else {
                ext.pop();
            }
        }
        let hi = ext.iter().fold(0.0f64, |a, p| a.max(p.1.abs()));
        let lo = ext.iter().fold(f64::INFINITY, |a, p| a.min(p.1.abs()));
        reference = ext.iter().map(|p| p.0).collect();
        if (hi - lo) <= opts.tol * hi {
            let scale = 1.0 / ext[0].1;
            let q: Vec<f64> = coeffs.iter().map(|c| c * scale).collect();
            return Ok((q, reference, exchange + 1));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_exchanges, residual: level })
}

/// Degree-n snake polynomial of `majorant`.
pub fn compute_snake(majorant: &Majorant, n: usize, opts: &SnakeOptions) -> Result<SnakePolynomial> {
    majorant.validate()?;
    if n == 0 {
        return Err(out_of_range("snake degree must be at least 1"));
    }
    if let Majorant::Sampled { points } = majorant {
        if points.iter().any(|p| p.1 <= 0.0) {
            return Err(invalid("sampled majorants must be strictly positive for the exchange"));
        }
    }
    let zeros = majorant.zeros();
    if zeros.len() > n {
        return Err(Error::Infeasible(format!(
            "{}: every polynomial of degree {n} below the majorant vanishes identically",
            majorant.name()
        )));
    }
    let m = n - zeros.len();
    let (q, reference, exchanges) = remez(&|x| majorant.reduced(x), m, &zeros, opts)?;
    let mut coeffs = q;
    for &z in &zeros {
        coeffs = cheb_mul_linear(&coeffs, z);
    }
    if coeffs[n] < 0.0 {
        coeffs.iter_mut().for_each(|c| *c = -*c);
    }
    let mut points: Vec<f64> = reference.iter().chain(&zeros).copied().collect();
    points.sort_by(|a, b| b.total_cmp(a));
    let degenerate = points.windows(2).any(|w| w[0] - w[1] <= 1e-9);
    let mut snake = SnakePolynomial {
        majorant: majorant.clone(),
        degree: n,
        cheb_coeffs: coeffs,
        alternation_points: points,
        equioscillation_residual: 0.0,
        degenerate,
        exchanges,
    };
    snake.equioscillation_residual = equioscillation_residual(&snake);
    Ok(snake)
}

/// max of the bound excess (|ω| − μ)⁺ on a 10⁴-point grid and the touch
/// defects |ω(τ_i) − (−1)^i μ(τ_i)|.
pub fn equioscillation_residual(snake: &SnakePolynomial) -> f64 {
    let mu = &snake.majorant;
    let excess = (0..=10_000)
        .map(|k| -1.0 + 2.0 * k as f64 / 10_000.0)
        .map(|x| (snake.eval(x).abs() - mu.eval(x)).max(0.0))
        .fold(0.0, f64::max);
    let touch = snake
        .alternation_points
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            (snake.eval(t) - s * mu.eval(t)).abs()
        })
        .fold(0.0, f64::max);
    excess.max(touch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    Nonnegative,
    SignAlternating,
    Mixed,
}

/// Sign structure of the Chebyshev coefficients. Coefficients below 1e-12 in
/// magnitude count as zero; sign_alternating means the remaining ones
/// alternate in sign from the (positive) leading coefficient downwards.
pub fn cheb_expansion_signs(snake: &SnakePolynomial) -> SignPattern {
    let nonzero: Vec<f64> = snake.cheb_coeffs.iter().rev().copied().filter(|c| c.abs() >= 1e-12).collect();
    if nonzero.iter().all(|&c| c >= -1e-10) {
        return SignPattern::Nonnegative;
    }
    let alternating = nonzero.iter().enumerate().all(|(i, &c)| if i % 2 == 0 { c >= -1e-10 } else { c <= 1e-10 });
    if alternating {
        SignPattern::SignAlternating
    } else {
        SignPattern::Mixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkovOptions {
    /// Constraint grid for M (Chebyshev points).
    pub constraint_grid: usize,
    /// Evaluation points t* for ‖p^{(k)}‖.
    pub eval_grid: usize,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        MarkovOptions { constraint_grid: 2001, eval_grid: 513 }
    }
}

/// max over t in `t_grid` and both signs of p^{(k)}(t) subject to
/// |p(x)| ≤ μ(x) at the constraint points.
fn derivative_lp(majorant: &Majorant, n: usize, k: usize, constraints: &[f64], t_grid: &[f64]) -> Result<f64> {
    let rows: Vec<Vec<f64>> = constraints.iter().map(|&x| chebyshev_t_all(n, x)).collect();
    let bounds: Vec<f64> = constraints.iter().map(|&x| majorant.eval(x).max(0.0)).collect();
    let mut best = 0.0f64;
    for &t in t_grid {
        // g_j = T_j^{(k)}(t)
        let g: Vec<f64> = (0..=n)
            .map(|j| {
                let mut e = vec![0.0; j + 1];
                e[j] = 1.0;
                cheb_eval(&cheb_derivative(&e, k), t)
            })
            .collect();
        // The feasible set is symmetric under p → −p, so one sign suffices.
        best = best.max(maximize_box_constrained(&rows, &bounds, &g)?);
    }
    Ok(best)
}

/// M_{k,μ}: sup ‖p^{(k)}‖ over degree-n p with |p| ≤ μ on [-1, 1], by LP on
/// a Chebyshev constraint grid augmented with `extra` points (e.g. δ*).
pub fn markov_extremal_with(majorant: &Majorant, n: usize, k: usize, opts: &MarkovOptions, extra: &[f64]) -> Result<f64> {
    majorant.validate()?;
    if !(1..=n).contains(&k) {
        return Err(out_of_range(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut constraints = chebyshev_grid(opts.constraint_grid);
    constraints.extend_from_slice(extra);
    derivative_lp(majorant, n, k, &constraints, &chebyshev_grid(opts.eval_grid))
}

/// M_{k,μ} with the constraint grid augmented by the alternation points of
/// the snake (when it exists), so that M ≤ D* holds exactly.
pub fn markov_extremal(majorant: &Majorant, n: usize, k: usize, opts: &MarkovOptions) -> Result<f64> {
    let extra = compute_snake(majorant, n, &SnakeOptions::default()).map(|s| s.alternation_points).unwrap_or_default();
    markov_extremal_with(majorant, n, k, opts, &extra)
}

/// D*_{k,μ}: same LP with constraints only at the alternation points.
pub fn duffin_schaeffer_extremal(snake: &SnakePolynomial, k: usize, opts: &MarkovOptions) -> Result<f64> {
    let n = snake.degree;
    if !(1..=n).contains(&k) {
        return Err(out_of_range(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if snake.degenerate {
        return Err(Error::Degenerate { i: 0, j: 0, floor: 1e-9 });
    }
    derivative_lp(&snake.majorant, n, k, &snake.alternation_points, &chebyshev_grid(opts.eval_grid))
}

/// ‖ω^{(k)}‖ on the evaluation grid.
pub fn snake_derivative_norm(snake: &SnakePolynomial, k: usize, opts: &MarkovOptions) -> f64 {
    let d = cheb_derivative(&snake.cheb_coeffs, k);
    chebyshev_grid(opts.eval_grid).iter().map(|&t| cheb_eval(&d, t).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalRow {
    pub k: usize,
    pub markov: f64,
    pub duffin_schaeffer: Option<f64>,
    pub snake_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnakeReport {
    pub snake: SnakePolynomial,
    pub pattern: SignPattern,
    pub extremal: Vec<ExtremalRow>,
}

/// Snake, sign pattern, and the M / D* / ‖ω^{(k)}‖ table for `ks`.
pub fn snake_report(majorant: &Majorant, n: usize, ks: &[usize], snake_opts: &SnakeOptions, opts: &MarkovOptions) -> Result<SnakeReport> {
    let snake = compute_snake(majorant, n, snake_opts)?;
    let pattern = cheb_expansion_signs(&snake);
    let extremal = ks
        .iter()
        .map(|&k| {
            let markov = markov_extremal_with(majorant, n, k, opts, &snake.alternation_points)?;
            let duffin_schaeffer = if snake.degenerate { None } else { Some(duffin_schaeffer_extremal(&snake, k, opts)?) };
            Ok(ExtremalRow { k, markov, duffin_schaeffer, snake_norm: snake_derivative_norm(&snake, k, opts) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SnakeReport { snake, pattern, extremal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_majorant_gives_chebyshev() {
        let s = compute_snake(&Majorant::One, 5, &SnakeOptions::default()).unwrap();
        for (j, c) in s.cheb_coeffs.iter().enumerate() {
            assert_abs_diff_eq!(*c, if j == 5 { 1.0 } else { 0.0 }, epsilon = 1e-10);
        }
        assert_eq!(s.alternation_points.len(), 6);
        assert!(s.equioscillation_residual < 1e-10);
        assert_eq!(cheb_expansion_signs(&s), SignPattern::Nonnegative);
    }

    #[test]
    fn parabola_degree_two() {
        let s = compute_snake(&Majorant::Parabola, 2, &SnakeOptions::default()).unwrap();
        assert_abs_diff_eq!(s.cheb_coeffs[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cheb_coeffs[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cheb_coeffs[2], 0.5, epsilon = 1e-12);
        for (t, want) in s.alternation_points.iter().zip([1.0, 0.0, -1.0]) {
            assert_abs_diff_eq!(*t, want, epsilon = 1e-9);
        }
        assert_eq!(cheb_expansion_signs(&s), SignPattern::SignAlternating);
        assert!(compute_snake(&Majorant::Parabola, 1, &SnakeOptions::default()).is_err());
    }

    #[test]
    fn abs_x_degree_four_is_x_t3() {
        let s = compute_snake(&Majorant::AbsX, 4, &SnakeOptions::default()).unwrap();
        // x T3 = (T4 + T2)/2
        let want = [0.0, 0.0, 0.5, 0.0, 0.5];
        for (c, w) in s.cheb_coeffs.iter().zip(want) {
            assert_abs_diff_eq!(*c, w, epsilon = 1e-8);
        }
        assert!(!s.degenerate);
    }

    #[test]
    fn derivative_coefficients() {
        // T3' = 3 U2 = 3(2 T2 + T0)... check by value instead.
        let a = [0.3, -0.2, 0.5, 0.7];
        let d = cheb_derivative(&a, 1);
        let h = 1e-6;
        for &x in &[-0.8, 0.1, 0.6] {
            let fd = (cheb_eval(&a, x + h) - cheb_eval(&a, x - h)) / (2.0 * h);
            assert_abs_diff_eq!(cheb_eval(&d, x), fd, epsilon = 1e-8);
        }
        let t4 = [0.0, 0.0, 0.0, 0.0, 1.0];
        assert_abs_diff_eq!(cheb_eval(&cheb_derivative(&t4, 4), 0.3), 192.0, epsilon = 1e-9);
    }

    #[test]
    fn catalog_snakes_equioscillate() {
        for mu in Majorant::catalog() {
            for n in 1..=8 {
                match compute_snake(&mu, n, &SnakeOptions::default()) {
                    Ok(s) => {
                        assert_eq!(s.alternation_points.len(), n + 1, "{} n={n}", mu.name());
                        assert!(s.equioscillation_residual < 1e-8, "{} n={n}: {}", mu.name(), s.equioscillation_residual);
                    }
                    Err(Error::Infeasible(_)) => assert!(mu.zeros().len() > n),
                    Err(e) => panic!("{} n={n}: {e}", mu.name()),
                }
            }
        }
    }

    #[test]
    fn uniqueness_up_to_sign() {
        for mu in [Majorant::SqrtQuadratic, Majorant::Semicircle, Majorant::AbsQuadratic] {
            let a = compute_snake(&mu, 6, &SnakeOptions::default()).unwrap();
            let b = compute_snake(&mu, 6, &SnakeOptions { perturb: 0.05, ..Default::default() }).unwrap();
            for (x, y) in a.cheb_coeffs.iter().zip(&b.cheb_coeffs) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn markov_for_constant_majorant() {
        let opts = MarkovOptions { constraint_grid: 401, eval_grid: 65 };
        let m = markov_extremal(&Majorant::One, 5, 1, &opts).unwrap();
        assert_abs_diff_eq!(m, 25.0, epsilon = 1e-6);
        let s = compute_snake(&Majorant::One, 5, &SnakeOptions::default()).unwrap();
        let d = duffin_schaeffer_extremal(&s, 1, &opts).unwrap();
        assert_abs_diff_eq!(d, 25.0, epsilon = 1e-6);
        let m4 = markov_extremal(&Majorant::One, 4, 4, &opts).unwrap();
        assert_abs_diff_eq!(m4, 192.0, epsilon = 1e-6);
    }

    #[test]
    fn markov_monotone_in_majorant() {
        let opts = MarkovOptions { constraint_grid: 201, eval_grid: 33 };
        let mu = Majorant::SqrtQuadratic;
        let bigger = Majorant::sampled_from(|x| 1.1 * mu.eval(x), 201);
        let a = markov_extremal(&mu, 4, 1, &opts).unwrap();
        let b = markov_extremal_with(&bigger, 4, 1, &opts, &[]).unwrap();
        assert!(b >= a - 1e-9);
    }
}
