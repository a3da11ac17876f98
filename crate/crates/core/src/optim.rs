//! Projected gradient descent with Armijo backtracking.
//!
//! The trial step of each iteration is the Barzilai-Borwein step computed
//! from the previous move; it is then halved until the Armijo condition
//! holds, so the objective never increases between iterations.

use crate::error::{Error, Result};
use crate::model::{project_probability_simplex, Domain};

/// How iterates are kept feasible.
pub trait Constraint {
    /// Turns an ambient gradient at `x` into a search direction (in place).
    fn tangent(&self, _x: &[f64], _g: &mut [f64]) {}
    /// Maps a trial point back onto the feasible set.
    fn retract(&self, x: &mut [f64]);
    /// Rejects runaway iterates.
    fn guard(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Every point of a flat buffer lives in `domain`.
#[derive(Debug, Clone, Copy)]
pub struct PointsIn {
    pub domain: Domain,
    /// Largest allowed point norm, if any.
    pub radius_cap: Option<f64>,
}

impl PointsIn {
    pub fn new(domain: Domain) -> Self {
        PointsIn { domain, radius_cap: None }
    }
}

impl Constraint for PointsIn {
    fn tangent(&self, x: &[f64], g: &mut [f64]) {
        if let Domain::Sphere { dim, .. } = self.domain {
            for (p, gp) in x.chunks_exact(dim).zip(g.chunks_exact_mut(dim)) {
                let pp: f64 = p.iter().map(|v| v * v).sum();
                if pp > 0.0 {
                    let a = p.iter().zip(gp.iter()).map(|(u, v)| u * v).sum::<f64>() / pp;
                    gp.iter_mut().zip(p).for_each(|(v, u)| *v -= a * u);
                }
            }
        }
    }

    fn retract(&self, x: &mut [f64]) {
        let d = self.domain.dim();
        x.chunks_exact_mut(d).for_each(|p| self.domain.project(p));
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite coordinate".into()));
        }
        if let Some(cap) = self.radius_cap {
            let d = self.domain.dim();
            for (i, p) in x.chunks_exact(d).enumerate() {
                let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r > cap {
                    return Err(Error::Divergence(format!("point {i} escaped to radius {r:.3e} (cap {cap})")));
                }
            }
        }
        Ok(())
    }
}

/// Weights on the probability simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProbabilitySimplex;

impl Constraint for ProbabilitySimplex {
    fn retract(&self, x: &mut [f64]) {
        project_probability_simplex(x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop when the projected-gradient norm drops to this value.
    pub tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    /// Keep the objective value of every accepted iterate.
    pub record_trace: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iter: 5000,
            tol: 1e-8,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1e-2,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub iterations: usize,
    pub value: f64,
    pub stationarity: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Minimizes `eval` over the set described by `constraint`, starting at `x`
/// (which is retracted first). `eval(x, grad)` returns the objective and
/// writes the ambient gradient.
pub fn minimize<F, C>(x: &mut Vec<f64>, mut eval: F, constraint: &C, opts: &DescentOptions) -> Result<DescentReport>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    C: Constraint + ?Sized,
{
    let n = x.len();
    constraint.retract(x);
    let mut grad = vec![0.0; n];
    let mut value = eval(x, &mut grad)?;
    let mut dir = grad.clone();
    constraint.tangent(x, &mut dir);

    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut trial_dir = vec![0.0; n];
    let mut step = opts.initial_step;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(value);
    }

    let stationarity_of = |x: &[f64], dir: &[f64], buf: &mut Vec<f64>| -> f64 {
        buf.clear();
        buf.extend(x.iter().zip(dir).map(|(a, b)| a - b));
        constraint.retract(buf);
        buf.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let mut scratch = Vec::with_capacity(n);
    let mut stationarity = stationarity_of(x, &dir, &mut scratch);

    let mut iterations = 0;
    let mut converged = stationarity <= opts.tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut t = step;
        let mut accepted = false;
        for _ in 0..80 {
            trial.iter_mut().zip(x.iter().zip(&dir)).for_each(|(o, (a, b))| *o = a - t * b);
            constraint.retract(&mut trial);
            let moved: f64 = dir.iter().zip(x.iter().zip(&trial)).map(|(d, (a, b))| d * (a - b)).sum();
            let candidate = match eval(&trial, &mut trial_grad) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) | Err(Error::Degenerate { .. }) => None,
                Err(e) => return Err(e),
            };
            if let Some(v) = candidate {
                if v <= value - opts.armijo_c1 * moved && v <= value {
                    trial_dir.copy_from_slice(&trial_grad);
                    constraint.tangent(&trial, &mut trial_dir);
                    // Barzilai-Borwein step for the next iteration.
                    let mut ss = 0.0;
                    let mut sy = 0.0;
                    for k in 0..n {
                        let s = trial[k] - x[k];
                        ss += s * s;
                        sy += s * (trial_dir[k] - dir[k]);
                    }
                    step = if sy > 0.0 && ss > 0.0 { (ss / sy).min(1e6 * opts.initial_step.max(1.0)) } else { 2.0 * t };
                    accepted = v < value;
                    std::mem::swap(x, &mut trial);
                    std::mem::swap(&mut grad, &mut trial_grad);
                    std::mem::swap(&mut dir, &mut trial_dir);
                    value = v;
                    break;
                }
            }
            t *= opts.backtrack;
        }
        constraint.guard(x)?;
        if opts.record_trace {
            trace.push(value);
        }
        stationarity = stationarity_of(x, &dir, &mut scratch);
        if stationarity <= opts.tol {
            converged = true;
        } else if !accepted {
            // No decrease representable in floating point along this direction.
            break;
        }
    }
    Ok(DescentReport { iterations, value, stationarity, converged, trace })
}

/// Compass search polish: derivative-free, so it also settles cusp extrema
/// that gradient steps only approach. Each coordinate is moved by `+-h`, then
/// retracted; `h` halves whenever no move improves.
pub fn compass_polish<F, C>(x: &mut Vec<f64>, mut eval: F, constraint: &C, h0: f64, h_min: f64, max_evals: usize) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
    C: Constraint + ?Sized,
{
    constraint.retract(x);
    let mut best = eval(x)?;
    let mut h = h0;
    let mut evals = 0;
    let mut trial = x.clone();
    while h >= h_min && evals < max_evals {
        let mut improved = false;
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(x);
                trial[k] += sign * h;
                constraint.retract(&mut trial);
                evals += 1;
                if let Ok(v) = eval(&trial) {
                    if v < best {
                        best = v;
                        x.copy_from_slice(&trial);
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(best)
}
