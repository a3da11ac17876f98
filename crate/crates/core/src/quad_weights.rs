//! Interpolation by spherical harmonics on S², integration weights of
//! fundamental systems, and Fekete-point optimization.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Domain;
use crate::optim::{minimize, DescentOptions, PointsIn};
use crate::rng::{task_rng, TaskRng};

/// Condition estimate |r_11 / r_NN| above which a system counts as singular.
pub const COND_LIMIT: f64 = 1e12;
/// Weights above this count as positive.
pub const POSITIVE_TOL: f64 = 1e-12;

/// Number of real spherical harmonics of degree ≤ n on S².
pub fn harmonic_count(n: usize) -> usize {
    (n + 1) * (n + 1)
}

/// Real spherical harmonics Y_{l,m}(x), 0 ≤ l ≤ n, normalized so that
/// ∫ Y² dσ = 1 for the uniform probability measure σ. Order: l ascending,
/// m = -l..l. `x` need not be normalized.
pub fn real_harmonics(n: usize, x: &[f64]) -> Vec<f64> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let z = (x[2] / r).clamp(-1.0, 1.0);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let phi = x[1].atan2(x[0]);
    // pbar[l][m] = sqrt((2l+1)(l-m)!/(l+m)!) P_l^m(z), no Condon-Shortley phase.
    let mut pbar = vec![vec![0.0; n + 1]; n + 1];
    pbar[0][0] = 1.0;
    for m in 1..=n {
        let mf = m as f64;
        pbar[m][m] = pbar[m - 1][m - 1] * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
    }
    for m in 0..n {
        pbar[m + 1][m] = z * (2.0 * m as f64 + 3.0).sqrt() * pbar[m][m];
    }
    for m in 0..=n {
        for l in (m + 2)..=n {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((2.0 * lf - 1.0) * (2.0 * lf + 1.0) / ((lf - mf) * (lf + mf))).sqrt();
            let b = ((2.0 * lf + 1.0) * (lf + mf - 1.0) * (lf - mf - 1.0) / ((2.0 * lf - 3.0) * (lf + mf) * (lf - mf))).sqrt();
            pbar[l][m] = a * z * pbar[l - 1][m] - b * pbar[l - 2][m];
        }
    }
    let mut out = Vec::with_capacity(harmonic_count(n));
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=n {
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            let v = pbar[l][am];
            out.push(match m.cmp(&0) {
                std::cmp::Ordering::Equal => v,
                std::cmp::Ordering::Greater => sqrt2 * v * (m as f64 * phi).cos(),
                std::cmp::Ordering::Less => sqrt2 * v * (am as f64 * phi).sin(),
            });
        }
    }
    out
}

/// N×N matrix with rows Y(x_i).
pub fn sh_basis_matrix(points: &[[f64; 3]], n: usize) -> Result<DMatrix<f64>> {
    let big_n = harmonic_count(n);
    if points.len() != big_n {
        return Err(Error::DimensionMismatch { expected: big_n, got: points.len() });
    }
    let mut a = DMatrix::zeros(big_n, big_n);
    for (i, p) in points.iter().enumerate() {
        for (k, v) in real_harmonics(n, p).into_iter().enumerate() {
            a[(i, k)] = v;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSystem {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub det_log_abs: f64,
    /// |r_11 / r_NN| from the pivoted QR of the basis matrix.
    pub cond_estimate: f64,
}

/// log|det| and the condition estimate from a column-pivoted QR.
fn qr_summary(a: &DMatrix<f64>) -> (f64, f64) {
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows()).map(|k| r[(k, k)].abs()).collect();
    let log_det = diag.iter().map(|d| d.ln()).sum();
    let cond = diag[0] / diag[diag.len() - 1];
    (log_det, cond)
}

impl FundamentalSystem {
    /// Validates the point count, normalizes the points, and checks that the
    /// interpolation matrix is nonsingular.
    pub fn new(degree: usize, points: Vec<[f64; 3]>) -> Result<Self> {
        let points: Vec<[f64; 3]> = points
            .into_iter()
            .map(|p| {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                [p[0] / r, p[1] / r, p[2] / r]
            })
            .collect();
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(invalid("points must be finite and nonzero"));
        }
        let a = sh_basis_matrix(&points, degree)?;
        let (det_log_abs, cond_estimate) = qr_summary(&a);
        if !(cond_estimate <= COND_LIMIT) {
            return Err(Error::IllConditioned(cond_estimate));
        }
        Ok(FundamentalSystem { degree, points, det_log_abs, cond_estimate })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub weights: Vec<f64>,
    pub all_positive: bool,
    /// max |N w_i − 1|
    pub max_dev: f64,
    /// |Σ w_i − 1|
    pub sum_check: f64,
    pub cond_estimate: f64,
}

/// w_i = ∫ ℓ_i dσ, from Σ_i w_i Y_{l,m}(x_i) = δ_{(l,m),(0,0)}.
pub fn integration_weights(system: &FundamentalSystem) -> Result<WeightReport> {
    let a = sh_basis_matrix(&system.points, system.degree)?;
    let at = a.transpose();
    let qr = at.clone().col_piv_qr();
    let r = qr.r();
    let cond = r[(0, 0)].abs() / r[(r.nrows() - 1, r.nrows() - 1)].abs();
    if !(cond <= COND_LIMIT) {
        return Err(Error::IllConditioned(cond));
    }
    let mut rhs = DVector::zeros(a.nrows());
    rhs[0] = 1.0;
    let w = qr.solve(&rhs).ok_or(Error::IllConditioned(cond))?;
    let big_n = w.len() as f64;
    let weights: Vec<f64> = w.iter().copied().collect();
    Ok(WeightReport {
        all_positive: weights.iter().all(|&v| v > POSITIVE_TOL),
        max_dev: weights.iter().map(|v| (big_n * v - 1.0).abs()).fold(0.0, f64::max),
        sum_check: (weights.iter().sum::<f64>() - 1.0).abs(),
        cond_estimate: cond,
        weights,
    })
}

fn random_unit(rng: &mut TaskRng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r > 1e-12 {
            return [v[0] / r, v[1] / r, v[2] / r];
        }
    }
}

/// i.i.d. uniform fundamental system; singular draws are resampled. Returns
/// the system and the number of rejected draws.
pub fn iid_system(n: usize, rng: &mut TaskRng) -> (FundamentalSystem, usize) {
    let mut rejected = 0;
    loop {
        let pts = (0..harmonic_count(n)).map(|_| random_unit(rng)).collect();
        match FundamentalSystem::new(n, pts) {
            Ok(s) => return (s, rejected),
            Err(_) => rejected += 1,
        }
    }
}

/// −log|det A| and its gradient with respect to the flat point buffer.
fn neg_log_det(n: usize, x: &[f64], grad: &mut [f64]) -> Result<f64> {
    let big_n = harmonic_count(n);
    let mut a = DMatrix::zeros(big_n, big_n);
    for i in 0..big_n {
        for (k, v) in real_harmonics(n, &x[3 * i..3 * i + 3]).into_iter().enumerate() {
            a[(i, k)] = v;
        }
    }
    let lu = a.lu();
    let u = lu.u();
    let mut log_det = 0.0;
    for k in 0..big_n {
        log_det += u[(k, k)].abs().ln();
    }
    if !log_det.is_finite() {
        return Ok(f64::INFINITY);
    }
    let inv = match lu.try_inverse() {
        Some(m) => m,
        None => return Ok(f64::INFINITY),
    };
    // ∂ log|det A| / ∂x_i = Σ_k (A⁻¹)_{k,i} ∇Y_k(x_i); basis gradients by
    // central differences of Y(x/|x|).
    let h = 1e-6;
    for i in 0..big_n {
        for c in 0..3 {
            let mut p = [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
            p[c] += h;
            let yp = real_harmonics(n, &p);
            p[c] -= 2.0 * h;
            let ym = real_harmonics(n, &p);
            let mut g = 0.0;
            for k in 0..big_n {
                g += inv[(k, i)] * (yp[k] - ym[k]) / (2.0 * h);
            }
            grad[3 * i + c] = -g;
        }
    }
    Ok(-log_det)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeketeOptions {
    pub seed: u64,
    pub restarts: usize,
    pub iters: usize,
    pub tol: f64,
}

impl Default for FeketeOptions {
    fn default() -> Self {
        FeketeOptions { seed: 0, restarts: 4, iters: 500, tol: 1e-9 }
    }
}

const FEKETE_STREAM: u64 = 0xfe7e;
const IID_STREAM: u64 = 0x11d;

/// Local maximization of log|det| by tangent-projected ascent from
/// `restarts` i.i.d. starts; the largest determinant wins.
pub fn fekete_optimize(n: usize, opts: &FeketeOptions) -> Result<FundamentalSystem> {
    let restarts = opts.restarts.max(1);
    let runs: Vec<Result<FundamentalSystem>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = task_rng(opts.seed, FEKETE_STREAM, k as u64);
            let (start, _) = iid_system(n, &mut rng);
            if n == 0 {
                return Ok(start);
            }
            let mut x: Vec<f64> = start.points.iter().flatten().copied().collect();
            let descent = DescentOptions { max_iter: opts.iters, tol: opts.tol, initial_step: 1e-2, ..Default::default() };
            minimize(&mut x, |c, g| neg_log_det(n, c, g), &PointsIn::new(Domain::Sphere { dim: 3, radius: 1.0 }), &descent)?;
            FundamentalSystem::new(n, x.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect())
        })
        .collect();
    let mut best: Option<FundamentalSystem> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(s) => {
                if best.as_ref().is_none_or(|b| s.det_log_abs > b.det_log_abs) {
                    best = Some(s);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::NoConvergence { iterations: 0, residual: f64::NAN }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    IidUniform,
    Fekete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub positive: bool,
    pub max_dev: f64,
    pub sum_check: f64,
    pub cond_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStatistics {
    pub n: usize,
    pub sampler: Sampler,
    pub trials: usize,
    pub positivity_fraction: f64,
    pub mean_max_dev: f64,
    pub median_max_dev: f64,
    pub max_max_dev: f64,
    /// Singular i.i.d. draws that were resampled.
    pub rejections: usize,
    pub rows: Vec<TrialRow>,
}

/// Positivity and deviation statistics over `trials` independent systems.
pub fn weight_statistics(n: usize, trials: usize, sampler: Sampler, seed: u64, fekete: &FeketeOptions) -> Result<WeightStatistics> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let results: Vec<Result<(TrialRow, usize)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (system, rejected) = match sampler {
                Sampler::IidUniform => iid_system(n, &mut task_rng(seed, IID_STREAM, t as u64)),
                Sampler::Fekete => {
                    let o = FeketeOptions { seed: crate::rng::derive_seed(seed, FEKETE_STREAM, t as u64), ..*fekete };
                    (fekete_optimize(n, &o)?, 0)
                }
            };
            let w = integration_weights(&system)?;
            Ok((
                TrialRow { trial: t, positive: w.all_positive, max_dev: w.max_dev, sum_check: w.sum_check, cond_estimate: w.cond_estimate },
                rejected,
            ))
        })
        .collect();
    let mut rows = Vec::with_capacity(trials);
    let mut rejections = 0;
    for r in results {
        let (row, rej) = r?;
        rows.push(row);
        rejections += rej;
    }
    let mut devs: Vec<f64> = rows.iter().map(|r| r.max_dev).collect();
    devs.sort_by(f64::total_cmp);
    let median = if devs.len() % 2 == 1 { devs[devs.len() / 2] } else { 0.5 * (devs[devs.len() / 2 - 1] + devs[devs.len() / 2]) };
    Ok(WeightStatistics {
        n,
        sampler,
        trials,
        positivity_fraction: rows.iter().filter(|r| r.positive).count() as f64 / trials as f64,
        mean_max_dev: devs.iter().sum::<f64>() / trials as f64,
        median_max_dev: median,
        max_max_dev: *devs.last().unwrap(),
        rejections,
        rows,
    })
}
