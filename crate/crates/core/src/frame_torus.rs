//! Discrete-measure experiments: p-frame energy minimization on S^{d-1} and
//! distance-energy maximization on spheres and the flat torus.
//!
//! All energies are double sums over an atomic measure and include the
//! diagonal, so a measure with atoms of mass w_i pays Σ w_i² K(x_i, x_i).

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::sphere_weight_norm;
use crate::error::{out_of_range, Error, Result};
use crate::model::{energy_flat, weight_gradient_flat, Configuration, Domain, EnergyMode, KernelSpec, Metric};
use crate::optim::{compass_polish, minimize, DescentOptions, PointsIn, ProbabilitySimplex};
use crate::quadrature::{gauss_legendre_on, integrate};
use crate::rng::task_rng;

/// Where a distance energy lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceDomain {
    /// Chordal distance on S^{d-1} ⊂ ℝ^d.
    SphereEuclid { d: usize },
    /// Great-circle distance on S^{d-1} ⊂ ℝ^d.
    SphereGeodesic { d: usize },
    /// ℝ²/ℤ² with the flat metric.
    Torus2,
}

impl DistanceDomain {
    pub fn domain(&self) -> Domain {
        match *self {
            DistanceDomain::SphereEuclid { d } | DistanceDomain::SphereGeodesic { d } => Domain::Sphere { dim: d, radius: 1.0 },
            DistanceDomain::Torus2 => Domain::Torus2,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            DistanceDomain::SphereEuclid { .. } => Metric::Euclid,
            DistanceDomain::SphereGeodesic { .. } => Metric::Geodesic,
            DistanceDomain::Torus2 => Metric::Torus,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DistanceDomain::SphereEuclid { .. } => 2.0,
            DistanceDomain::SphereGeodesic { .. } => PI,
            DistanceDomain::Torus2 => 0.5f64.sqrt(),
        }
    }

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn check(&self) -> Result<()> {
        match *self {
            DistanceDomain::SphereEuclid { d } | DistanceDomain::SphereGeodesic { d } if d < 2 => {
                Err(out_of_range(format!("sphere in dimension {d} has no distance energy")))
            }
            _ => Ok(()),
        }
    }
}

/// The energy being optimized; used for classification and uniform values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSetting {
    /// ∬ |⟨x,y⟩|^p on S^{d-1}, minimized.
    PFrame { p: f64, d: usize },
    /// ∬ ρ(x,y)^α, maximized.
    Distance { domain: DistanceDomain, alpha: f64 },
}

impl MeasureSetting {
    fn kernel(&self) -> KernelSpec {
        match *self {
            MeasureSetting::PFrame { p, .. } => KernelSpec::PFrame { p },
            MeasureSetting::Distance { domain, alpha } => KernelSpec::DistancePower { alpha, metric: domain.metric() },
        }
    }

    fn domain(&self) -> Domain {
        match *self {
            MeasureSetting::PFrame { d, .. } => Domain::Sphere { dim: d, radius: 1.0 },
            MeasureSetting::Distance { domain, .. } => domain.domain(),
        }
    }

    fn on_sphere(&self) -> Option<usize> {
        match *self {
            MeasureSetting::PFrame { d, .. } => Some(d),
            MeasureSetting::Distance { domain: DistanceDomain::Torus2, .. } => None,
            MeasureSetting::Distance { domain, .. } => Some(domain.dim()),
        }
    }

    /// Energy of the measure including the diagonal.
    pub fn energy(&self, coords: &[f64], weights: &[f64]) -> Result<f64> {
        let dim = self.domain().dim();
        let off = energy_flat(dim, coords, weights, &self.kernel(), None, EnergyMode::MeanField, None)?;
        Ok(off + self.diagonal(weights))
    }

    fn diagonal(&self, weights: &[f64]) -> f64 {
        match self {
            MeasureSetting::PFrame { .. } => weights.iter().map(|w| w * w).sum(),
            MeasureSetting::Distance { .. } => 0.0,
        }
    }

    /// Energy of the normalized uniform measure.
    pub fn uniform_energy(&self) -> Result<f64> {
        match *self {
            MeasureSetting::PFrame { p, d } => sphere_zonal_mean(d, |th| th.cos().abs().powf(p), true),
            MeasureSetting::Distance { domain: DistanceDomain::SphereEuclid { d }, alpha } => {
                sphere_zonal_mean(d, |th| (2.0 * (0.5 * th).sin()).powf(alpha), false)
            }
            MeasureSetting::Distance { domain: DistanceDomain::SphereGeodesic { d }, alpha } => {
                sphere_zonal_mean(d, |th| th.powf(alpha), false)
            }
            MeasureSetting::Distance { domain: DistanceDomain::Torus2, alpha } => Ok(torus_uniform_energy(alpha, 256)),
        }
    }
}

/// ∫ g(θ) dσ(y) for fixed x on S^{d-1}, θ the angle between x and y.
fn sphere_zonal_mean(d: usize, g: impl Fn(f64) -> f64, split_at_half_pi: bool) -> Result<f64> {
    let f = |th: f64| g(th) * th.sin().powi(d as i32 - 2);
    let v = if split_at_half_pi {
        integrate(&f, 0.0, 0.5 * PI, 1e-15, 1e-13)?.0 + integrate(&f, 0.5 * PI, PI, 1e-15, 1e-13)?.0
    } else {
        integrate(&f, 0.0, PI, 1e-15, 1e-13)?.0
    };
    Ok(v / sphere_weight_norm(d))
}

/// I_α of Lebesgue measure on the flat torus: ∫_{[-1/2,1/2]²} |z|^α dz, by
/// tensor Gauss-Legendre with `nodes` points per axis on each half.
pub fn torus_uniform_energy(alpha: f64, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre_on(nodes, 0.0, 0.5);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        for (yj, wj) in x.iter().zip(&w) {
            acc += wi * wj * (xi * xi + yj * yj).powf(0.5 * alpha);
        }
    }
    4.0 * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureClass {
    OrthonormalBasisLike,
    TightFrameLike,
    UniformLike,
    TwoPoint,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureAtom {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// Distance below which support points are merged into one atom.
pub const ATOM_TOL: f64 = 1e-2;
/// Atoms lighter than this are ignored by the classifier.
const ATOM_MASS_FLOOR: f64 = 1e-4;

fn wrap_offset(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

/// Groups support points into atoms (single linkage at [`ATOM_TOL`]). For
/// p-frame settings x and -x are the same atom.
pub fn measure_atoms(setting: &MeasureSetting, cfg: &Configuration) -> Vec<MeasureAtom> {
    let dim = cfg.dim();
    let fold = matches!(setting, MeasureSetting::PFrame { .. });
    let torus = matches!(setting.domain(), Domain::Torus2);
    let idx: Vec<usize> = (0..cfg.len()).filter(|&i| cfg.weights()[i] > 1e-12).collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        if torus {
            let u = wrap_offset(a[0], b[0]);
            let v = wrap_offset(a[1], b[1]);
            return (u * u + v * v).sqrt();
        }
        let minus: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if fold {
            let plus: f64 = a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum::<f64>().sqrt();
            minus.min(plus)
        } else {
            minus
        }
    };
    // Union-find over the support.
    let mut parent: Vec<usize> = (0..idx.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for a in 0..idx.len() {
        for b in (a + 1)..idx.len() {
            if dist(cfg.point(idx[a]), cfg.point(idx[b])) <= ATOM_TOL {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for a in 0..idx.len() {
        let r = find(&mut parent, a);
        groups.entry(r).or_default().push(idx[a]);
    }
    let mut atoms: Vec<MeasureAtom> = groups
        .values()
        .map(|members| {
            let anchor = *members.iter().max_by(|&&i, &&j| cfg.weights()[i].total_cmp(&cfg.weights()[j])).unwrap();
            let a = cfg.point(anchor);
            let mass: f64 = members.iter().map(|&i| cfg.weights()[i]).sum();
            let mut c = vec![0.0; dim];
            for &i in members {
                let w = cfg.weights()[i] / mass;
                let p = cfg.point(i);
                if torus {
                    c[0] += w * wrap_offset(p[0], a[0]);
                    c[1] += w * wrap_offset(p[1], a[1]);
                } else {
                    let sign = if fold && p.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                    c.iter_mut().zip(p).for_each(|(ci, pi)| *ci += w * sign * pi);
                }
            }
            if torus {
                c[0] = (a[0] + c[0]).rem_euclid(1.0);
                c[1] = (a[1] + c[1]).rem_euclid(1.0);
            } else {
                let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    c.iter_mut().for_each(|v| *v /= n);
                }
            }
            MeasureAtom { point: c, mass }
        })
        .collect();
    atoms.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    atoms
}

/// Frame operator Σ w_i x_i x_iᵀ (row-major d×d).
pub fn frame_operator(cfg: &Configuration) -> Vec<f64> {
    let d = cfg.dim();
    let mut s = vec![0.0; d * d];
    for (p, w) in cfg.points().zip(cfg.weights()) {
        for a in 0..d {
            for b in 0..d {
                s[a * d + b] += w * p[a] * p[b];
            }
        }
    }
    s
}

/// Explicit classification. Tests run in order: two_point, orthonormal
/// basis, uniform, tight frame.
///
/// - two_point: the two heaviest atoms carry ≥ 0.999 of the mass and sit
///   within 1e-3 of the diameter apart (distance settings only);
/// - orthonormal_basis_like: exactly d atoms up to sign, pairwise
///   |⟨u,v⟩| ≤ 1e-2, masses within 1e-2 of 1/d (p-frame only);
/// - uniform_like: energy within 1e-3 of the uniform value and at least 3d
///   atoms heavier than 1e-4;
/// - tight_frame_like: frame operator within 1e-3 of I/d entrywise (spheres).
pub fn classify_measure(setting: &MeasureSetting, cfg: &Configuration, energy: f64) -> Result<MeasureClass> {
    let atoms: Vec<MeasureAtom> = measure_atoms(setting, cfg).into_iter().filter(|a| a.mass >= ATOM_MASS_FLOOR).collect();
    if let MeasureSetting::Distance { domain, .. } = setting {
        if atoms.len() >= 2 && atoms[0].mass + atoms[1].mass >= 0.999 {
            let sep = crate::model::pairwise_distance(domain.metric(), &atoms[0].point, &atoms[1].point)?;
            if (sep - domain.diameter()).abs() <= 1e-3 {
                return Ok(MeasureClass::TwoPoint);
            }
        }
    }
    if let MeasureSetting::PFrame { d, .. } = *setting {
        let orthogonal = atoms.len() == d
            && atoms.iter().all(|a| (a.mass - 1.0 / d as f64).abs() <= 1e-2)
            && atoms.iter().enumerate().all(|(i, a)| {
                atoms[i + 1..].iter().all(|b| a.point.iter().zip(&b.point).map(|(x, y)| x * y).sum::<f64>().abs() <= 1e-2)
            });
        if orthogonal {
            return Ok(MeasureClass::OrthonormalBasisLike);
        }
    }
    let dim = setting.domain().dim();
    if (energy - setting.uniform_energy()?).abs() <= 1e-3 && atoms.len() >= 3 * dim {
        return Ok(MeasureClass::UniformLike);
    }
    if let Some(d) = setting.on_sphere() {
        let s = frame_operator(cfg);
        let worst = (0..d * d)
            .map(|k| (s[k] - if k % (d + 1) == 0 { 1.0 / d as f64 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if worst <= 1e-3 {
            return Ok(MeasureClass::TightFrameLike);
        }
    }
    Ok(MeasureClass::Other)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasureResult {
    pub setting: MeasureSetting,
    pub configuration: Configuration,
    pub energy: f64,
    pub classification: MeasureClass,
    /// Atoms heavier than 1e-4 (the empirical support).
    pub atoms: Vec<MeasureAtom>,
    /// Energy after every point or weight phase of the winning restart.
    pub trace: Vec<f64>,
    pub restart_energies: Vec<f64>,
    pub best_restart: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Point/weight alternations.
    pub rounds: usize,
    /// Descent iterations per phase.
    pub max_iter: usize,
    pub tol: f64,
    /// Finish with a derivative-free polish of the points.
    pub polish: bool,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { seed: 0, restarts: 8, rounds: 40, max_iter: 300, tol: 1e-12, polish: true }
    }
}

const PFRAME_STREAM: u64 = 0x0f4a;
const DISTANCE_STREAM: u64 = 0xd157;

/// Alternating descent on `sign · energy`; sign = +1 minimizes, -1
/// maximizes. Returns (coords, weights, trace of the true energy).
fn alternate(setting: &MeasureSetting, sign: f64, mut x: Vec<f64>, mut w: Vec<f64>, opts: &FrameOptions) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let domain = setting.domain();
    let dim = domain.dim();
    let kernel = setting.kernel();
    let points = PointsIn::new(domain);
    let descent = DescentOptions { max_iter: opts.max_iter, tol: opts.tol, ..Default::default() };
    x.chunks_exact_mut(dim).for_each(|p| domain.project(p));
    let mut trace = vec![setting.energy(&x, &w)?];
    for _ in 0..opts.rounds {
        let before = *trace.last().unwrap();
        let wk = w.clone();
        minimize(
            &mut x,
            |c, g| {
                let e = energy_flat(dim, c, &wk, &kernel, None, EnergyMode::MeanField, Some(&mut *g))?;
                g.iter_mut().for_each(|v| *v *= sign);
                Ok(sign * (e + setting.diagonal(&wk)))
            },
            &points,
            &descent,
        )?;
        trace.push(setting.energy(&x, &w)?);
        let xk = x.clone();
        minimize(
            &mut w,
            |ww, g| {
                let gw = weight_gradient_flat(dim, &xk, ww, &kernel, None)?;
                let diag = matches!(setting, MeasureSetting::PFrame { .. });
                for (i, v) in g.iter_mut().enumerate() {
                    *v = sign * (gw[i] + if diag { 2.0 * ww[i] } else { 0.0 });
                }
                Ok(sign * setting.energy(&xk, ww)?)
            },
            &ProbabilitySimplex,
            &descent,
        )?;
        let after = setting.energy(&x, &w)?;
        trace.push(after);
        if (sign * (before - after)).abs() <= 1e-15 * after.abs().max(1.0) {
            break;
        }
    }
    if opts.polish {
        let wk = w.clone();
        compass_polish(&mut x, |c| Ok(sign * setting.energy(c, &wk)?), &points, 1e-3, 1e-12, 200_000)?;
        trace.push(setting.energy(&x, &w)?);
    }
    Ok((x, w, trace))
}

fn run_restarts(
    setting: MeasureSetting,
    sign: f64,
    n_support: usize,
    stream: u64,
    opts: &FrameOptions,
) -> Result<DiscreteMeasureResult> {
    if opts.restarts == 0 || n_support == 0 {
        return Err(out_of_range("need at least one restart and one support point"));
    }
    let domain = setting.domain();
    let dim = domain.dim();
    let runs: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = task_rng(opts.seed, stream, k as u64);
            let x: Vec<f64> = match domain {
                Domain::Torus2 => {
                    let u = Uniform::new(0.0, 1.0).expect("valid range");
                    (0..n_support * dim).map(|_| u.sample(&mut rng)).collect()
                }
                _ => (0..n_support * dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
            };
            alternate(&setting, sign, x, vec![1.0 / n_support as f64; n_support], opts)
        })
        .collect();
    let mut best: Option<(usize, (Vec<f64>, Vec<f64>, Vec<f64>))> = None;
    let mut restart_energies = Vec::with_capacity(runs.len());
    let mut first_err: Option<Error> = None;
    for (k, r) in runs.into_iter().enumerate() {
        match r {
            Ok(run) => {
                let e = *run.2.last().unwrap();
                restart_energies.push(e);
                if best.as_ref().is_none_or(|(_, b)| sign * e < sign * *b.2.last().unwrap()) {
                    best = Some((k, run));
                }
            }
            Err(e) => {
                restart_energies.push(f64::NAN);
                first_err.get_or_insert(e);
            }
        }
    }
    let (best_restart, (x, w, trace)) = match best {
        Some(b) => b,
        None => return Err(first_err.unwrap_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })),
    };
    let configuration = Configuration::from_flat(x, w, domain)?;
    let energy = setting.energy(configuration.coords(), configuration.weights())?;
    let classification = classify_measure(&setting, &configuration, energy)?;
    let atoms = measure_atoms(&setting, &configuration).into_iter().filter(|a| a.mass >= ATOM_MASS_FLOOR).collect();
    Ok(DiscreteMeasureResult { setting, configuration, energy, classification, atoms, trace, restart_energies, best_restart })
}

/// Minimizes ∬|⟨x,y⟩|^p over probability measures on S^{d-1} supported on
/// `n_support` points.
pub fn minimize_pframe(p: f64, d: usize, n_support: usize, opts: &FrameOptions) -> Result<DiscreteMeasureResult> {
    if !(p > 0.0) {
        return Err(out_of_range(format!("p = {p} must be positive")));
    }
    if d < 2 || n_support < d {
        return Err(out_of_range(format!("need d >= 2 and N_support >= d (d = {d}, N = {n_support})")));
    }
    run_restarts(MeasureSetting::PFrame { p, d }, 1.0, n_support, PFRAME_STREAM, opts)
}

/// Maximizes ∬ρ(x,y)^α over probability measures on `n_support` points.
pub fn maximize_distance_energy(domain: DistanceDomain, alpha: f64, n_support: usize, opts: &FrameOptions) -> Result<DiscreteMeasureResult> {
    if !(alpha > 0.0) {
        return Err(out_of_range(format!("alpha = {alpha} must be positive")));
    }
    domain.check()?;
    run_restarts(MeasureSetting::Distance { domain, alpha }, -1.0, n_support, DISTANCE_STREAM, opts)
}

/// Largest value any two-point measure reaches: (1/2) diam^α.
pub fn best_two_point_energy(domain: DistanceDomain, alpha: f64) -> f64 {
    0.5 * domain.diameter().powf(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusScanRow {
    pub alpha: f64,
    pub best_energy: f64,
    pub uniform_energy: f64,
    /// uniform minus best discrete energy; positive means uniform wins.
    pub gap: f64,
    pub classification: MeasureClass,
    pub support_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusScan {
    pub n_support: usize,
    pub rows: Vec<TorusScanRow>,
    /// Linear interpolation of the first sign change of the gap.
    pub crossing_estimate: Option<f64>,
}

/// Default support size for torus scans.
pub const TORUS_SUPPORT: usize = 24;

/// For each α: best discrete maximizer against the uniform measure.
pub fn torus_phase_scan(alpha_grid: &[f64], n_support: usize, opts: &FrameOptions) -> Result<TorusScan> {
    if let Some(a) = alpha_grid.iter().find(|a| !(**a > 1.0 && **a < 2.0)) {
        return Err(out_of_range(format!("torus scan grid must lie inside (1, 2), got {a}")));
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let o = FrameOptions { seed: crate::rng::derive_seed(opts.seed, DISTANCE_STREAM, k as u64), ..*opts };
            let r = maximize_distance_energy(DistanceDomain::Torus2, alpha, n_support, &o)?;
            let uniform_energy = torus_uniform_energy(alpha, 256);
            Ok(TorusScanRow {
                alpha,
                best_energy: r.energy,
                uniform_energy,
                gap: uniform_energy - r.energy,
                classification: r.classification,
                support_size: r.atoms.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossing_estimate = rows.windows(2).find(|w| w[0].gap.signum() != w[1].gap.signum()).map(|w| {
        let (a, b) = (&w[0], &w[1]);
        a.alpha + (b.alpha - a.alpha) * a.gap / (a.gap - b.gap)
    });
    Ok(TorusScan { n_support, rows, crossing_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick() -> FrameOptions {
        FrameOptions { restarts: 3, ..Default::default() }
    }

    #[test]
    fn onb_value_is_one_over_d() {
        let cfg = Configuration::from_flat(vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 0.5], Domain::Sphere { dim: 2, radius: 1.0 }).unwrap();
        let s = MeasureSetting::PFrame { p: 2.0, d: 2 };
        let e = s.energy(cfg.coords(), cfg.weights()).unwrap();
        assert_abs_diff_eq!(e, 0.5, epsilon = 1e-15);
        assert_eq!(classify_measure(&s, &cfg, e).unwrap(), MeasureClass::OrthonormalBasisLike);
    }

    #[test]
    fn uniform_values() {
        // ∫|cos|^4 on the circle is 3/8; E|x-y|² on any sphere is 2.
        assert_abs_diff_eq!(MeasureSetting::PFrame { p: 4.0, d: 2 }.uniform_energy().unwrap(), 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(MeasureSetting::PFrame { p: 2.0, d: 3 }.uniform_energy().unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        let e = MeasureSetting::Distance { domain: DistanceDomain::SphereEuclid { d: 3 }, alpha: 2.0 };
        assert_abs_diff_eq!(e.uniform_energy().unwrap(), 2.0, epsilon = 1e-12);
        let g = MeasureSetting::Distance { domain: DistanceDomain::SphereGeodesic { d: 3 }, alpha: 1.0 };
        assert_abs_diff_eq!(g.uniform_energy().unwrap(), PI / 2.0, epsilon = 1e-12);
        // On the torus |z|² splits: 2 ∫_{-1/2}^{1/2} x² dx = 1/6.
        assert_abs_diff_eq!(torus_uniform_energy(2.0, 64), 1.0 / 6.0, epsilon = 1e-14);
        // Polar oracle for α = 1: the integral of r over the square.
        let (v, _) = integrate(|t: f64| (0.5 / t.cos()).powi(3) / 3.0, 0.0, PI / 4.0, 1e-15, 1e-14).unwrap();
        assert_abs_diff_eq!(torus_uniform_energy(1.0, 256), 8.0 * v, epsilon = 1e-7);
    }

    #[test]
    fn pframe_p_below_two_finds_basis() {
        let r = minimize_pframe(1.5, 3, 12, &quick()).unwrap();
        assert_abs_diff_eq!(r.energy, 1.0 / 3.0, epsilon = 1e-6);
        assert_eq!(r.classification, MeasureClass::OrthonormalBasisLike);
        let diag: f64 = r.configuration.weights().iter().map(|w| w * w).sum();
        assert!(r.energy >= diag - 1e-15);
    }

    #[test]
    fn pframe_p4_circle_reaches_uniform_value() {
        let r = minimize_pframe(4.0, 2, 12, &quick()).unwrap();
        assert_abs_diff_eq!(r.energy, 0.375, epsilon = 1e-6);
    }

    #[test]
    fn sphere_transitions() {
        let r = maximize_distance_energy(DistanceDomain::SphereEuclid { d: 3 }, 2.0, 12, &quick()).unwrap();
        assert_abs_diff_eq!(r.energy, 2.0, epsilon = 1e-6);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert_abs_diff_eq!(best_two_point_energy(DistanceDomain::SphereEuclid { d: 3 }, 2.0), 2.0, epsilon = 1e-15);
        let r = maximize_distance_energy(DistanceDomain::SphereGeodesic { d: 3 }, 1.0, 12, &quick()).unwrap();
        assert_abs_diff_eq!(r.energy, PI / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn torus_two_point_is_classified() {
        let r = maximize_distance_energy(DistanceDomain::Torus2, 2.0, 2, &quick()).unwrap();
        assert_abs_diff_eq!(r.energy, 0.25, epsilon = 1e-9);
        assert_eq!(r.classification, MeasureClass::TwoPoint);
        let sep = crate::model::pairwise_distance(Metric::Torus, &r.atoms[0].point, &r.atoms[1].point).unwrap();
        assert_abs_diff_eq!(sep, 0.5f64.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn torus_alpha_one_prefers_uniform() {
        let two = best_two_point_energy(DistanceDomain::Torus2, 1.0);
        let uni = torus_uniform_energy(1.0, 256);
        assert!(uni - two > 0.02);
    }

    #[test]
    fn atoms_fold_signs_for_frames() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]];
        let cfg = Configuration::new(&pts, vec![0.25, 0.25, 0.5], Domain::Sphere { dim: 2, radius: 1.0 }).unwrap();
        let atoms = measure_atoms(&MeasureSetting::PFrame { p: 1.0, d: 2 }, &cfg);
        assert_eq!(atoms.len(), 2);
        assert_abs_diff_eq!(atoms[0].mass, 0.5, epsilon = 1e-15);
    }
}
