//! Equilibrium measures of Riesz energies with radial external fields, and
//! on compact convex bodies, approximated by weighted particle systems.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{out_of_range, Error, Result};
use crate::model::{
    energy_flat, weight_gradient_flat, Configuration, Domain, EnergyMode, FieldSpec, KernelSpec,
};
use crate::optim::{minimize, DescentOptions, PointsIn, ProbabilitySimplex};
use crate::quadrature::{golden_min, integrate};
use crate::rng::task_rng;

/// ∫_0^π sin^{d-2}θ dθ.
pub(crate) fn sphere_weight_norm(d: usize) -> f64 {
    let d = d as f64;
    (0.5 * PI.ln() + ln_gamma((d - 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// ∫_0^π reg(θ) θ^β dθ / ∫_0^π sin^{d-2}θ dθ. With θ = π u^q the θ^β factor
/// becomes π^{β+1} q u^{q(β+1)-1}, so q = 1/(β+1) removes an algebraic
/// endpoint singularity exactly.
fn sphere_average<G: Fn(f64) -> f64>(reg: G, d: usize, beta: f64, q: f64) -> Result<f64> {
    let scale = PI.powf(beta + 1.0) * q;
    let expo = q * (beta + 1.0) - 1.0;
    let (v, _) = integrate(
        |u: f64| if u <= 0.0 { 0.0 } else { scale * u.powf(expo) * reg(PI * u.powf(q)) },
        0.0,
        1.0,
        1e-16,
        1e-13,
    )?;
    Ok(v / sphere_weight_norm(d))
}

/// (sin θ / θ)^{d-2}
fn sinc_power(t: f64, d: usize) -> f64 {
    (t.sin() / t).powi(d as i32 - 2)
}

/// c_{s,d} = ∬ |x - y|^{-s} dσ(x) dσ(y) for the uniform probability measure
/// σ on the unit sphere S^{d-1} ⊂ ℝ^d.
pub fn uniform_sphere_riesz_integral(s: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(out_of_range(format!("dimension d = {d} must be at least 2")));
    }
    if !(s > -2.0 && s < d as f64 - 1.0) {
        return Err(out_of_range(format!("s = {s} outside (-2, d-1) for d = {d}")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    // (2 sin(θ/2))^{-s} sin^{d-2}θ = θ^β · (2 sin(θ/2)/θ)^{-s} (sin θ/θ)^{d-2}
    let beta = d as f64 - 2.0 - s;
    let q = if beta < 0.0 { 1.0 / (beta + 1.0) } else { 1.0 };
    sphere_average(|t| (2.0 * (0.5 * t).sin() / t).powf(-s) * sinc_power(t, d), d, beta, q)
}

/// b_d = ∬ log(1/|x - y|) dσ(x) dσ(y) on the unit sphere S^{d-1}.
pub fn unit_sphere_log_energy(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(out_of_range(format!("dimension d = {d} must be at least 2")));
    }
    // θ = π u² tames the logarithm at θ = 0 (needed for d = 2).
    let beta = d as f64 - 2.0;
    sphere_average(|t| -(2.0 * (0.5 * t).sin()).ln() * sinc_power(t, d), d, beta, 2.0)
}

fn check_threshold_range(s: f64, d: usize) -> Result<()> {
    if !(s > -2.0 && s < d as f64 - 3.0) {
        return Err(out_of_range(format!("threshold needs -2 < s < d-3; got s = {s}, d = {d}")));
    }
    Ok(())
}

/// The critical field exponent above which the uniform measure on a sphere
/// is the equilibrium measure.
pub fn alpha_threshold(s: f64, d: usize) -> Result<f64> {
    check_threshold_range(s, d)?;
    let df = d as f64;
    if s == 0.0 {
        let b = unit_sphere_log_energy(d)?;
        return Ok((-1.0 / (2.0 * b)).max(2.0 - (df - 4.0) / (df - 3.0)));
    }
    let c = uniform_sphere_riesz_integral(s, d)?;
    let first = s * c / (2.0 - 2.0 * c);
    let second = 2.0 - (s + 2.0) * (df - s - 4.0) / (2.0 * (df - s - 3.0));
    Ok(first.max(second))
}

/// R_* = (c_{s,d} / (2γ))^{1/(α+s)}, the radius of the equilibrium sphere.
pub fn equilibrium_radius(s: f64, d: usize, alpha: f64, gamma: f64) -> Result<f64> {
    if !(alpha + s > 0.0) {
        return Err(out_of_range(format!("need alpha + s > 0; got alpha = {alpha}, s = {s}")));
    }
    if !(gamma > 0.0) {
        return Err(out_of_range(format!("gamma = {gamma} must be positive")));
    }
    let c = uniform_sphere_riesz_integral(s, d)?;
    Ok((c / (2.0 * gamma)).powf(1.0 / (alpha + s)))
}

/// Energy of the uniform measure on the sphere of radius R:
/// c R^{-s}/s + 2(γ/α) R^α (with -log R + b_d in place of the first term
/// when s = 0).
pub fn sphere_measure_energy(s: f64, d: usize, field: &FieldSpec, radius: f64) -> Result<f64> {
    let pair = if s == 0.0 {
        unit_sphere_log_energy(d)? - radius.ln()
    } else {
        uniform_sphere_riesz_integral(s, d)? * radius.powf(-s) / s
    };
    Ok(pair + 2.0 * field.gamma / field.alpha * radius.powf(field.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConstants {
    pub c_sd: f64,
    pub b_d: f64,
    pub alpha_threshold: f64,
    pub r_star: f64,
}

/// All threshold quantities for (s, d) with R_* evaluated at α = α_{s,d}.
pub fn threshold_constants(s: f64, d: usize, gamma: f64) -> Result<ThresholdConstants> {
    let alpha = alpha_threshold(s, d)?;
    Ok(ThresholdConstants {
        c_sd: uniform_sphere_riesz_integral(s, d)?,
        b_d: unit_sphere_log_energy(d)?,
        alpha_threshold: alpha,
        r_star: equilibrium_radius(s, d, alpha, gamma)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub s: f64,
    pub alpha_threshold: f64,
    pub r_star: f64,
}

/// Rows (s, α_{s,d}, R_* at α = α_{s,d}) over `s_grid`. `gamma_override`
/// maps s to the γ used for that row (default γ).
pub fn heatmap_region(d: usize, s_grid: &[f64], gamma: f64) -> Result<Vec<HeatmapRow>> {
    heatmap_region_with(d, s_grid, |_| gamma)
}

pub fn heatmap_region_with<G: Fn(f64) -> f64>(d: usize, s_grid: &[f64], gamma: G) -> Result<Vec<HeatmapRow>> {
    s_grid
        .iter()
        .map(|&s| {
            let alpha = alpha_threshold(s, d)?;
            let r_star = equilibrium_radius(s, d, alpha, gamma(s))?;
            Ok(HeatmapRow { s, alpha_threshold: alpha, r_star })
        })
        .collect()
}

/// Argmin over R of the sphere-measure energy by golden-section search; an
/// independent route to [`equilibrium_radius`].
pub fn radius_by_line_search(s: f64, d: usize, field: &FieldSpec) -> Result<f64> {
    let guess = equilibrium_radius(s, d, field.alpha, field.gamma).unwrap_or(1.0);
    let (lo, hi) = (guess * 1e-3, guess * 1e3);
    // Search in log R where the energy is unimodal and well scaled.
    let f = |t: f64| sphere_measure_energy(s, d, field, t.exp()).unwrap_or(f64::INFINITY);
    let (mut t, _) = golden_min(f, lo.ln(), hi.ln(), 1e-10);
    // Golden section stalls near sqrt(eps); finish with Newton steps on
    // central differences.
    let h = 1e-4;
    for _ in 0..3 {
        let (fm, f0, fp) = (f(t - h), f(t), f(t + h));
        let curv = fm - 2.0 * f0 + fp;
        if !(curv > 0.0) {
            break;
        }
        t -= h * (fp - fm) / (2.0 * curv);
    }
    Ok(t.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportLabel {
    Sphere,
    MultiShell,
    BallLike,
    CentralClusterPlusShells,
    Vertices,
    TwoPoints,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialMode {
    pub radius: f64,
    pub mass_fraction: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub center: Vec<f64>,
    pub mass: f64,
    /// Largest distance of a member point from `center`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportClassification {
    pub radial_modes: Vec<RadialMode>,
    pub label: SupportLabel,
    pub dim_estimate: f64,
    /// Point clusters that carry the mass, when the support is atomic.
    pub atoms: Vec<Atom>,
}

impl SupportClassification {
    /// Narrow modes carrying at least [`MAJOR_MODE_MASS`], not counting a
    /// central cluster. Matches the rule used for the label.
    pub fn shell_count(&self) -> usize {
        let major: Vec<&RadialMode> = self.radial_modes.iter().filter(|m| m.mass_fraction >= MAJOR_MODE_MASS).collect();
        let skip = usize::from(self.central_mass() > 0.0);
        major[skip..].iter().filter(|m| is_narrow(m)).count()
    }

    /// Mass of the innermost major mode if it sits near the origin.
    pub fn central_mass(&self) -> f64 {
        let major: Vec<&RadialMode> = self.radial_modes.iter().filter(|m| m.mass_fraction >= MAJOR_MODE_MASS).collect();
        match (major.first(), major.last()) {
            (Some(first), Some(last)) if major.len() > 1 && first.radius <= 0.2 * last.radius => first.mass_fraction,
            _ => 0.0,
        }
    }
}

/// Points lighter than this are ignored by the classifier.
const MASS_FLOOR: f64 = 1e-9;
/// Radial modes lighter than this do not influence the label.
pub const MAJOR_MODE_MASS: f64 = 0.01;

fn union_find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clusters of the weighted points with link length `tol`.
fn cluster_atoms(dim: usize, pts: &[&[f64]], w: &[f64], tol: f64) -> Vec<Atom> {
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= tol * tol {
                let (a, b) = (union_find_root(&mut parent, i), union_find_root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = union_find_root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
        .into_iter()
        .map(|g| {
            let mass: f64 = g.iter().map(|&i| w[i]).sum();
            let mut center = vec![0.0; dim];
            for &i in &g {
                center.iter_mut().zip(pts[i]).for_each(|(c, x)| *c += w[i] * x / mass);
            }
            let spread = g
                .iter()
                .map(|&i| pts[i].iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            Atom { center, mass, spread }
        })
        .collect()
}

/// Splits the radii `r[idx]` at the minima of their weighted Gaussian KDE
/// (Silverman bandwidth computed on this subset).
fn kde_split(r: &[f64], w: &[f64], idx: &[usize]) -> Vec<Vec<usize>> {
    let total: f64 = idx.iter().map(|&i| w[i]).sum();
    let mean = idx.iter().map(|&i| r[i] * w[i]).sum::<f64>() / total;
    let var = idx.iter().map(|&i| w[i] * (r[i] - mean).powi(2)).sum::<f64>() / total;
    let mut order = idx.to_vec();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
    let q = |p: f64| r[order[((order.len() - 1) as f64 * p).round() as usize]];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { var.sqrt().min(iqr / 1.34) } else { var.sqrt() };
    let (rmin, rmax) = (r[order[0]], r[order[order.len() - 1]]);
    let n_eff = total * total / idx.iter().map(|&i| w[i] * w[i]).sum::<f64>();
    let h = 0.9 * spread * n_eff.powf(-0.2);
    if !(h > 1e-12 * rmax.abs().max(1e-300)) {
        return vec![order];
    }
    let lo = rmin - 3.0 * h;
    let step = (rmax + 3.0 * h - lo) / 2047.0;
    let density: Vec<f64> = (0..2048)
        .map(|k| {
            let x = lo + k as f64 * step;
            idx.iter().map(|&i| w[i] * (-0.5 * ((x - r[i]) / h).powi(2)).exp()).sum()
        })
        .collect();
    let cuts: Vec<f64> = (1..2047)
        .filter(|&k| density[k] < density[k - 1] && density[k] <= density[k + 1])
        .map(|k| lo + k as f64 * step)
        .collect();
    let mut groups = vec![Vec::new()];
    let mut c = 0;
    for i in order {
        while c < cuts.len() && r[i] > cuts[c] {
            if !groups.last().expect("nonempty").is_empty() {
                groups.push(Vec::new());
            }
            c += 1;
        }
        groups.last_mut().expect("nonempty").push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn mode_of(r: &[f64], w: &[f64], idx: &[usize]) -> RadialMode {
    let m: f64 = idx.iter().map(|&i| w[i]).sum();
    let mu = idx.iter().map(|&i| w[i] * r[i]).sum::<f64>() / m;
    let var = idx.iter().map(|&i| w[i] * (r[i] - mu).powi(2)).sum::<f64>() / m;
    RadialMode { radius: mu, mass_fraction: m, width: var.sqrt() }
}

fn is_narrow(m: &RadialMode) -> bool {
    m.width <= 0.05 * m.radius
}

/// Groups the radii into modes. Broad groups found by a split are split
/// again with their own bandwidth (a global bandwidth blurs small-scale
/// structure next to a dominant shell).
fn refine_modes(r: &[f64], w: &[f64], idx: &[usize], depth: usize, out: &mut Vec<Vec<usize>>) {
    let groups = kde_split(r, w, idx);
    if groups.len() == 1 {
        out.push(groups.into_iter().next().expect("one group"));
        return;
    }
    for g in groups {
        if depth < 4 && g.len() >= 8 && !is_narrow(&mode_of(r, w, &g)) {
            refine_modes(r, w, &g, depth + 1, out);
        } else {
            out.push(g);
        }
    }
}

/// Radial modes of the weighted radii (weights already normalized).
fn radial_modes(r: &[f64], w: &[f64]) -> Vec<RadialMode> {
    let all: Vec<usize> = (0..r.len()).collect();
    let mut groups = Vec::new();
    refine_modes(r, w, &all, 0, &mut groups);
    let mut out: Vec<RadialMode> = groups.iter().map(|g| mode_of(r, w, g)).collect();
    out.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    // Merge neighbours closer than three times their combined widths.
    let mut k = 0;
    while k + 1 < out.len() {
        let (a, b) = (out[k], out[k + 1]);
        if b.radius - a.radius <= 3.0 * (a.width + b.width) {
            let m = a.mass_fraction + b.mass_fraction;
            let mu = (a.radius * a.mass_fraction + b.radius * b.mass_fraction) / m;
            let second = (a.mass_fraction * (a.width.powi(2) + a.radius.powi(2))
                + b.mass_fraction * (b.width.powi(2) + b.radius.powi(2)))
                / m;
            out[k] = RadialMode { radius: mu, mass_fraction: m, width: (second - mu * mu).max(0.0).sqrt() };
            out.remove(k + 1);
            k = k.saturating_sub(1);
        } else {
            k += 1;
        }
    }
    out
}

/// Correlation dimension: slope of log C(r) between the 0.2% and 4% pair
/// distance quantiles. Uses at most 2000 points (even stride).
fn correlation_dimension(pts: &[&[f64]]) -> f64 {
    let stride = pts.len().div_ceil(2000).max(1);
    let sub: Vec<&[f64]> = pts.iter().step_by(stride).copied().collect();
    let n = sub.len();
    if n < 3 {
        return 0.0;
    }
    let mut dist = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dist.push(sub[i].iter().zip(sub[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    dist.sort_by(f64::total_cmp);
    let m = dist.len();
    let (p_lo, p_hi) = (0.002, 0.04);
    let lo_i = ((m as f64 * p_lo) as usize).max(1).min(m - 1);
    let hi_i = ((m as f64 * p_hi) as usize).max(lo_i + 1).min(m - 1);
    let (r_lo, r_hi) = (dist[lo_i], dist[hi_i]);
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return 0.0;
    }
    ((hi_i as f64) / (lo_i as f64)).ln() / (r_hi / r_lo).ln()
}

/// Structural summary of a weighted configuration: atoms if the mass sits
/// on a few tight clusters, otherwise radial modes of the KDE of ‖x_i‖.
pub fn classify_support(cfg: &Configuration) -> SupportClassification {
    let dim = cfg.dim();
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for (p, &wi) in cfg.points().zip(cfg.weights()) {
        if wi > MASS_FLOOR {
            pts.push(p);
            w.push(wi);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let radii: Vec<f64> = pts.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let dim_estimate = correlation_dimension(&pts);
    let radial = radial_modes(&radii, &w);

    let atom_tol = 1e-2 * rmax.max(1e-12);
    let mut atoms = cluster_atoms(dim, &pts, &w, atom_tol);
    atoms.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    let heavy: Vec<Atom> = atoms.iter().filter(|a| a.mass >= 1e-3).cloned().collect();
    let heavy_mass: f64 = heavy.iter().map(|a| a.mass).sum();
    let merged = heavy.len() < pts.len();
    let atomic = heavy_mass >= 0.99 && heavy.len() <= (1usize << dim.min(20)).max(2) && (merged || heavy.len() <= 2);
    if atomic && heavy.len() >= 2 {
        let label = if heavy.len() == 2 { SupportLabel::TwoPoints } else { SupportLabel::Vertices };
        return SupportClassification { radial_modes: radial, label, dim_estimate, atoms: heavy };
    }

    // Stray particles form their own zero-width modes; labels look only at
    // modes carrying real mass.
    let major: Vec<RadialMode> = radial.iter().copied().filter(|m| m.mass_fraction >= MAJOR_MODE_MASS).collect();
    let outer = major.last().map(|m| m.radius).unwrap_or(0.0);
    let label = match major.len() {
        _ if rmax == 0.0 => SupportLabel::Other,
        0 => SupportLabel::Other,
        1 if is_narrow(&major[0]) => SupportLabel::Sphere,
        1 if dim_estimate >= dim as f64 - 0.5 => SupportLabel::BallLike,
        1 => SupportLabel::Other,
        _ if major[0].radius <= 0.2 * outer && major[1..].iter().all(is_narrow) => SupportLabel::CentralClusterPlusShells,
        _ if major.iter().all(is_narrow) => SupportLabel::MultiShell,
        _ if dim_estimate >= dim as f64 - 0.5 => SupportLabel::BallLike,
        _ => SupportLabel::Other,
    };
    SupportClassification { radial_modes: radial, label, dim_estimate, atoms: Vec::new() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Gradient-norm target per particle.
    pub tol: f64,
    /// Abort when a particle leaves this radius (default: 1e3 × radius guess).
    pub radius_cap: Option<f64>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions { seed: 0, restarts: 8, max_iter: 5000, tol: 1e-8, radius_cap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub converged: bool,
    pub best_restart: usize,
    pub restart_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub configuration: Configuration,
    pub classification: SupportClassification,
    pub report: EnergyReport,
}

fn riesz_or_log(s: f64) -> KernelSpec {
    if s == 0.0 {
        KernelSpec::Log
    } else {
        KernelSpec::Riesz { s }
    }
}

struct RunOutcome {
    coords: Vec<f64>,
    weights: Vec<f64>,
    energy: f64,
    iterations: usize,
    stationarity: f64,
    converged: bool,
}

/// Runs `restarts` seeded local minimizations in parallel and keeps the
/// lowest energy (ties go to the lower restart index).
fn best_of<F>(restarts: usize, run: F) -> Result<(Vec<f64>, Vec<f64>, EnergyReport)>
where
    F: Fn(usize) -> Result<RunOutcome> + Sync,
{
    let outcomes: Vec<Result<RunOutcome>> = (0..restarts).into_par_iter().map(&run).collect();
    let mut best: Option<(usize, RunOutcome)> = None;
    let mut energies = Vec::with_capacity(restarts);
    let mut first_err = None;
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                energies.push(o.energy);
                if best.as_ref().is_none_or(|(_, b)| o.energy < b.energy) {
                    best = Some((k, o));
                }
            }
            Err(e) => {
                energies.push(f64::NAN);
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((k, o)) => Ok((
            o.coords,
            o.weights,
            EnergyReport {
                energy: o.energy,
                iterations: o.iterations,
                stationarity: o.stationarity,
                converged: o.converged,
                best_restart: k,
                restart_energies: energies,
            },
        )),
        None => Err(first_err.unwrap_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })),
    }
}

const FIELD_STREAM: u64 = 0xf1e1d;
const BODY_STREAM: u64 = 0xb0d1;

/// Particle approximation of the equilibrium measure of the Riesz s-energy
/// (log energy at s = 0) in ℝ^d with the external field `field`, using N
/// equally weighted points.
pub fn minimize_field_energy(
    d: usize,
    s: f64,
    field: &FieldSpec,
    n: usize,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    if d == 0 {
        return Err(out_of_range("dimension must be positive"));
    }
    if !(s > -2.0 && s < d as f64) {
        return Err(out_of_range(format!("s = {s} outside (-2, d) for d = {d}")));
    }
    field.check_confining(s)?;
    if n == 0 || opts.restarts == 0 {
        return Err(out_of_range("need N >= 1 and at least one restart"));
    }
    let domain = Domain::FreeSpace { dim: d };
    if n == 1 {
        let cfg = Configuration::from_flat(vec![0.0; d], vec![1.0], domain)?;
        let classification = classify_support(&cfg);
        let report = EnergyReport {
            energy: 0.0,
            iterations: 0,
            stationarity: 0.0,
            converged: true,
            best_restart: 0,
            restart_energies: vec![0.0],
        };
        return Ok(EquilibriumResult { configuration: cfg, classification, report });
    }
    let kernel = riesz_or_log(s);
    let r_guess = if s < d as f64 - 1.0 { equilibrium_radius(s, d, field.alpha, field.gamma).unwrap_or(1.0) } else { 1.0 };
    let cap = opts.radius_cap.unwrap_or(1e3 * r_guess.max(1.0));
    let weights = vec![1.0 / n as f64; n];
    let cons = PointsIn { domain, radius_cap: Some(cap) };
    let descent = DescentOptions { max_iter: opts.max_iter, tol: opts.tol * n as f64, ..Default::default() };
    let (coords, weights, report) = best_of(opts.restarts, |k| {
        let mut rng = task_rng(opts.seed, FIELD_STREAM, k as u64);
        let scale = r_guess / (d as f64).sqrt();
        let mut x: Vec<f64> = (0..n * d).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); scale * z }).collect();
        let rep = minimize(
            &mut x,
            |c, g| energy_flat(d, c, &weights, &kernel, Some(field), EnergyMode::MeanField, Some(g)),
            &cons,
            &descent,
        )?;
        Ok(RunOutcome {
            coords: x,
            weights: weights.clone(),
            energy: rep.value,
            iterations: rep.iterations,
            stationarity: rep.stationarity,
            converged: rep.converged,
        })
    })?;
    let cfg = Configuration::from_flat(coords, weights, domain)?;
    let classification = classify_support(&cfg);
    Ok(EquilibriumResult { configuration: cfg, classification, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    /// Closed unit ball.
    Ball { dim: usize },
    /// [-1, 1]^d.
    Cube { dim: usize },
    /// {x ≥ 0, Σ x_i ≤ 1}.
    Simplex { dim: usize },
}

impl Body {
    pub fn domain(self) -> Domain {
        match self {
            Body::Ball { dim } => Domain::Ball { dim, radius: 1.0 },
            Body::Cube { dim } => Domain::Cube { dim },
            Body::Simplex { dim } => Domain::Simplex { dim },
        }
    }

    pub fn dim(self) -> usize {
        self.domain().dim()
    }

    /// A uniform random point of the body.
    pub fn sample(self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Body::Ball { dim } => {
                let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let r = rng.random::<f64>().powf(1.0 / dim as f64);
                g.iter().map(|v| r * v / norm).collect()
            }
            Body::Cube { dim } => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            Body::Simplex { dim } => {
                let e: Vec<f64> = (0..=dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                e[..dim].iter().map(|v| v / total).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Alternate point and weight updates instead of keeping equal weights.
    pub optimize_weights: bool,
    /// Point/weight alternations when `optimize_weights` is set.
    pub rounds: usize,
}

impl Default for BodyOptions {
    fn default() -> Self {
        BodyOptions { seed: 0, restarts: 8, max_iter: 5000, tol: 1e-8, optimize_weights: false, rounds: 30 }
    }
}

/// Particle approximation of the equilibrium measure of the Riesz s-energy
/// restricted to a convex body (no external field).
pub fn minimize_on_body(body: Body, s: f64, n: usize, opts: &BodyOptions) -> Result<EquilibriumResult> {
    let d = body.dim();
    if !(s < d as f64) || s <= -4.0 {
        return Err(out_of_range(format!("s = {s} outside (-4, d) for d = {d}")));
    }
    if n < 2 || opts.restarts == 0 {
        return Err(out_of_range("need N >= 2 and at least one restart"));
    }
    let kernel = riesz_or_log(s);
    let domain = body.domain();
    let cons = PointsIn::new(domain);
    let descent = DescentOptions { max_iter: opts.max_iter, tol: opts.tol * n as f64, ..Default::default() };
    let (coords, weights, report) = best_of(opts.restarts, |k| {
        let mut rng = task_rng(opts.seed, BODY_STREAM, k as u64);
        let mut x: Vec<f64> = (0..n).flat_map(|_| body.sample(&mut rng)).collect();
        let mut w = vec![1.0 / n as f64; n];
        let rounds = if opts.optimize_weights { opts.rounds.max(1) } else { 1 };
        let mut total_iter = 0;
        let mut last = (f64::INFINITY, f64::INFINITY, false);
        for _ in 0..rounds {
            let rep = minimize(
                &mut x,
                |c, g| energy_flat(d, c, &w, &kernel, None, EnergyMode::MeanField, Some(g)),
                &cons,
                &descent,
            )?;
            total_iter += rep.iterations;
            last = (rep.value, rep.stationarity, rep.converged);
            if !opts.optimize_weights {
                break;
            }
            let wrep = minimize(
                &mut w,
                |wt, g| {
                    let grad = weight_gradient_flat(d, &x, wt, &kernel, None)?;
                    g.copy_from_slice(&grad);
                    energy_flat(d, &x, wt, &kernel, None, EnergyMode::MeanField, None)
                },
                &ProbabilitySimplex,
                &DescentOptions { max_iter: opts.max_iter, tol: opts.tol, ..Default::default() },
            )?;
            total_iter += wrep.iterations;
            let improved = last.0 - wrep.value;
            last.0 = wrep.value;
            if improved.abs() <= 1e-15 * last.0.abs().max(1.0) && rep.converged {
                break;
            }
        }
        Ok(RunOutcome {
            coords: x,
            weights: w,
            energy: last.0,
            iterations: total_iter,
            stationarity: last.1,
            converged: last.2,
        })
    })?;
    let cfg = Configuration::from_flat(coords, weights, domain)?;
    let classification = classify_support(&cfg);
    Ok(EquilibriumResult { configuration: cfg, classification, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Closed form of ∬|x-y|^{-s} on S^{d-1} via the beta integral.
    fn c_closed_form(s: f64, d: usize) -> f64 {
        let d = d as f64;
        ((d - 2.0 - s) * 2f64.ln() + ln_gamma(d / 2.0) + ln_gamma((d - 1.0 - s) / 2.0)
            - 0.5 * PI.ln()
            - ln_gamma(d - 1.0 - s / 2.0))
            .exp()
    }

    #[test]
    fn riesz_integral_examples() {
        for d in [2, 3, 5, 10] {
            assert_abs_diff_eq!(uniform_sphere_riesz_integral(-2.0 + 1e-15, d).unwrap(), 2.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(uniform_sphere_riesz_integral(-1.0, 3).unwrap(), 4.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(uniform_sphere_riesz_integral(1.0, 3).unwrap(), 1.0, epsilon = 1e-12);
        assert!(uniform_sphere_riesz_integral(2.0, 3).is_err());
        assert!(uniform_sphere_riesz_integral(-2.0, 3).is_err());
    }

    #[test]
    fn riesz_integral_matches_closed_form() {
        for d in [2usize, 3, 4, 5, 7, 10] {
            for s in [-1.9, -1.5, -0.5, 0.3, 0.5, 0.9, 1.7, 2.5, 5.5, 8.2, 8.95] {
                if s >= d as f64 - 1.0 {
                    continue;
                }
                let got = uniform_sphere_riesz_integral(s, d).unwrap();
                let want = c_closed_form(s, d);
                assert!((got - want).abs() <= 1e-12 * want.abs(), "s={s} d={d}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn log_energy_examples() {
        assert_abs_diff_eq!(unit_sphere_log_energy(3).unwrap(), 0.5 - 2f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(unit_sphere_log_energy(2).unwrap(), 0.0, epsilon = 1e-12);
        for d in [2usize, 3, 5, 10] {
            // c_{s,d} = 1 + s b_d + O(s²).
            let h = 1e-4;
            let deriv = (uniform_sphere_riesz_integral(h, d).unwrap() - uniform_sphere_riesz_integral(-h, d).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(unit_sphere_log_energy(d).unwrap(), deriv, epsilon = 1e-6);
            let one_sided = (uniform_sphere_riesz_integral(h, d).unwrap() - 1.0) / h;
            assert_abs_diff_eq!(unit_sphere_log_energy(d).unwrap(), one_sided, epsilon = 1e-3);
        }
        assert_abs_diff_eq!(unit_sphere_log_energy(10).unwrap(), -0.317_261_904_761_904_76, epsilon = 1e-12);
    }

    #[test]
    fn threshold_examples() {
        // s = d - 4: the second branch is exactly 2.
        let a = alpha_threshold(1.0, 5).unwrap();
        assert!(a >= 2.0);
        assert_abs_diff_eq!(a, 2.0, epsilon = 1e-12);
        // s = 0, d = 10: second branch 8/7.
        assert!(alpha_threshold(0.0, 10).unwrap() >= 8.0 / 7.0 - 1e-15);
        // s = 1, d = 10 from the closed-form c.
        let c = c_closed_form(1.0, 10);
        let want = (c / (2.0 - 2.0 * c)).max(2.0 - 3.0 * 5.0 / 12.0);
        assert_abs_diff_eq!(alpha_threshold(1.0, 10).unwrap(), want, epsilon = 1e-11);
        assert!(alpha_threshold(2.0, 5).is_err());
        assert!(alpha_threshold(-2.0, 5).is_err());
    }

    #[test]
    fn threshold_is_continuous_at_zero() {
        for d in [4usize, 5, 10] {
            let b = unit_sphere_log_energy(d).unwrap();
            // Each side is off by O(s); the symmetric mean by O(s²).
            let branch = |s: f64| {
                let c = uniform_sphere_riesz_integral(s, d).unwrap();
                s * c / (2.0 - 2.0 * c)
            };
            let mean = 0.5 * (branch(1e-4) + branch(-1e-4));
            assert_abs_diff_eq!(mean, -1.0 / (2.0 * b), epsilon = 1e-5);
            assert_abs_diff_eq!(branch(1e-4), -1.0 / (2.0 * b), epsilon = 1e-3);
            let df = d as f64;
            let at = |s: f64| 2.0 - (s + 2.0) * (df - s - 4.0) / (2.0 * (df - s - 3.0));
            assert_abs_diff_eq!(at(1e-12), 2.0 - (df - 4.0) / (df - 3.0), epsilon = 1e-11);
        }
    }

    #[test]
    fn radius_examples() {
        let c = uniform_sphere_riesz_integral(1.0, 10).unwrap();
        assert_abs_diff_eq!(equilibrium_radius(1.0, 10, 4.0, c / 2.0).unwrap(), 1.0, epsilon = 1e-15);
        for (s, d, alpha, gamma) in [(1.0, 10, 4.0, 1.0), (-1.0, 5, 1.5, 0.7), (0.5, 3, 2.0, 3.0), (0.0, 4, 1.0, 1.0), (-1.5, 6, 2.5, 0.2)] {
            let field = FieldSpec::new(gamma, alpha).unwrap();
            let r = equilibrium_radius(s, d, alpha, gamma).unwrap();
            let r_ls = radius_by_line_search(s, d, &field).unwrap();
            assert!((r - r_ls).abs() <= 1e-8 * r.max(1.0), "{s} {d}: {r} vs {r_ls}");
        }
        assert!(equilibrium_radius(-2.0 + 0.5, 5, 1.0, 1.0).is_err());
        let r1 = equilibrium_radius(0.5, 5, 2.0, 1.0).unwrap();
        let r2 = equilibrium_radius(0.5, 5, 2.0, 2.0).unwrap();
        assert!(r2 < r1);
    }

    #[test]
    fn heatmap_examples() {
        let grid: Vec<f64> = (0..=12).map(|k| -1.8 + 0.5 * k as f64).filter(|s| *s < 7.0).collect();
        let rows = heatmap_region_with(10, &grid, |s| uniform_sphere_riesz_integral(s, 10).unwrap() / 2.0).unwrap();
        for r in &rows {
            assert_abs_diff_eq!(r.r_star, 1.0, epsilon = 1e-14);
            assert!(r.alpha_threshold > (-r.s).max(0.0));
        }
        let row0 = heatmap_region(10, &[0.0], 1.0).unwrap();
        assert!(row0[0].alpha_threshold >= 8.0 / 7.0);
    }

    fn sphere_points(n: usize, r: f64, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let nn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.iter().map(|v| r * v / nn).collect()
            })
            .collect()
    }

    #[test]
    fn classify_examples() {
        let mut rng = task_rng(1, 2, 3);
        let pts = sphere_points(200, 1.0, 3, &mut rng);
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * (1.0 + 1e-6 * rng.random::<f64>())).collect()).collect();
        let c = classify_support(&Configuration::uniform(&pts, Domain::FreeSpace { dim: 3 }).unwrap());
        assert_eq!(c.label, SupportLabel::Sphere);
        assert_eq!(c.radial_modes.len(), 1);
        assert_abs_diff_eq!(c.radial_modes[0].radius, 1.0, epsilon = 1e-5);

        let mut pts = sphere_points(150, 1.0, 5, &mut rng);
        pts.extend(sphere_points(100, 0.5, 5, &mut rng));
        for _ in 0..50 {
            let r = 0.05 * rng.random::<f64>();
            pts.extend(sphere_points(1, r, 5, &mut rng));
        }
        let c = classify_support(&Configuration::uniform(&pts, Domain::FreeSpace { dim: 5 }).unwrap());
        assert_eq!(c.label, SupportLabel::CentralClusterPlusShells, "{c:?}");
        assert_eq!(c.radial_modes.len(), 3);
        assert_eq!(c.shell_count(), 2);
        assert!(c.central_mass() > 0.1);
        let total: f64 = c.radial_modes.iter().map(|m| m.mass_fraction).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        for (m, want) in c.radial_modes.iter().zip([0.0, 0.5, 1.0]) {
            assert_abs_diff_eq!(m.radius, want, epsilon = 0.05);
        }

        let ball: Vec<Vec<f64>> = (0..2000).map(|_| Body::Ball { dim: 3 }.sample(&mut rng)).collect();
        let c = classify_support(&Configuration::uniform(&ball, Domain::FreeSpace { dim: 3 }).unwrap());
        assert_eq!(c.label, SupportLabel::BallLike);
        assert_abs_diff_eq!(c.dim_estimate, 3.0, epsilon = 0.3);
    }

    #[test]
    fn classify_is_rotation_and_permutation_invariant() {
        let mut rng = task_rng(4, 5, 6);
        let mut pts = sphere_points(80, 1.0, 3, &mut rng);
        pts.extend(sphere_points(40, 0.4, 3, &mut rng));
        let base = classify_support(&Configuration::uniform(&pts, Domain::FreeSpace { dim: 3 }).unwrap());
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let mut rotated: Vec<Vec<f64>> = pts.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect();
        rotated.reverse();
        let other = classify_support(&Configuration::uniform(&rotated, Domain::FreeSpace { dim: 3 }).unwrap());
        assert_eq!(base.label, other.label);
        assert_eq!(base.radial_modes.len(), other.radial_modes.len());
        for (a, b) in base.radial_modes.iter().zip(&other.radial_modes) {
            assert_abs_diff_eq!(a.radius, b.radius, epsilon = 1e-9);
            assert_abs_diff_eq!(a.mass_fraction, b.mass_fraction, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_particle_sits_at_origin() {
        let field = FieldSpec::new(1.0, 2.0).unwrap();
        let r = minimize_field_energy(3, 1.0, &field, 1, &EquilibriumOptions::default()).unwrap();
        assert_eq!(r.configuration.coords(), &[0.0, 0.0, 0.0]);
        assert_eq!(r.report.energy, 0.0);
    }

    #[test]
    fn small_field_run_lands_on_the_sphere() {
        // d = 5, s = 1, α = 4 ≥ α_{1,5}: the minimizer is uniform on a sphere.
        let field = FieldSpec::new(1.0, 4.0).unwrap();
        let opts = EquilibriumOptions { restarts: 2, seed: 3, ..Default::default() };
        let r = minimize_field_energy(5, 1.0, &field, 40, &opts).unwrap();
        let rs = equilibrium_radius(1.0, 5, 4.0, 1.0).unwrap();
        for radius in r.configuration.radii() {
            assert!((radius - rs).abs() <= 0.05 * rs, "{radius} vs {rs}");
        }
    }
}
