//! Domains, pair kernels, radial external fields, and exact discrete
//! energies with their analytic gradients.
//!
//! Points are stored row-major in a flat buffer (`coords[i * dim + c]`). All
//! pair sums visit pairs in `(i, j)`, `i < j` order so results are
//! reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_range, Error, Result};

/// Pairs closer than this are rejected under singular kernels.
pub const DISTANCE_FLOOR: f64 = 1e-14;
/// Tolerance on the total mass of a configuration.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance on domain membership.
pub const DOMAIN_TOL: f64 = 1e-10;

/// Where the points of a configuration live. `dim` is always the ambient
/// dimension, so `Sphere { dim: 3, .. }` is the 2-sphere in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    FreeSpace { dim: usize },
    Sphere { dim: usize, radius: f64 },
    Ball { dim: usize, radius: f64 },
    /// The cube `[-1, 1]^dim`.
    Cube { dim: usize },
    /// The corner simplex `{x >= 0, sum(x) <= 1}`.
    Simplex { dim: usize },
    /// The flat torus `R^2 / Z^2`, coordinates kept in `[0, 1)`.
    Torus2,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match *self {
            Domain::FreeSpace { dim }
            | Domain::Sphere { dim, .. }
            | Domain::Ball { dim, .. }
            | Domain::Cube { dim }
            | Domain::Simplex { dim } => dim,
            Domain::Torus2 => 2,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match *self {
            Domain::FreeSpace { .. } => x.iter().all(|v| v.is_finite()),
            Domain::Sphere { radius, .. } => (norm(x) - radius).abs() <= tol,
            Domain::Ball { radius, .. } => norm(x) <= radius + tol,
            Domain::Cube { .. } => x.iter().all(|v| v.abs() <= 1.0 + tol),
            Domain::Simplex { .. } => {
                x.iter().all(|&v| v >= -tol) && x.iter().sum::<f64>() <= 1.0 + tol
            }
            Domain::Torus2 => x.iter().all(|&v| (-tol..1.0 + tol).contains(&v)),
        }
    }

    /// Nearest-point projection (retraction for the sphere, wrap for the torus).
    pub fn project(&self, x: &mut [f64]) {
        match *self {
            Domain::FreeSpace { .. } => {}
            Domain::Sphere { radius, .. } => {
                let n = norm(x);
                if n > 0.0 {
                    x.iter_mut().for_each(|v| *v *= radius / n);
                } else {
                    x[0] = radius;
                }
            }
            Domain::Ball { radius, .. } => {
                let n = norm(x);
                if n > radius {
                    x.iter_mut().for_each(|v| *v *= radius / n);
                }
            }
            Domain::Cube { .. } => x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0)),
            Domain::Simplex { .. } => project_corner_simplex(x),
            Domain::Torus2 => x.iter_mut().for_each(|v| {
                *v = v.rem_euclid(1.0);
                if *v >= 1.0 {
                    *v = 0.0;
                }
            }),
        }
    }
}

/// Euclidean projection onto the probability simplex `{w >= 0, sum(w) = 1}`.
pub fn project_probability_simplex(w: &mut [f64]) {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    w.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

fn project_corner_simplex(x: &mut [f64]) {
    let clipped: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if clipped <= 1.0 {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
    } else {
        project_probability_simplex(x);
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// A weighted point cloud: a candidate discrete probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    domain: Domain,
}

impl Configuration {
    pub fn new(points: &[Vec<f64>], weights: Vec<f64>, domain: Domain) -> Result<Self> {
        let dim = domain.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, weights, domain)
    }

    /// Equal weights `1/N`.
    pub fn uniform(points: &[Vec<f64>], domain: Domain) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n], domain)
    }

    pub fn from_flat(coords: Vec<f64>, weights: Vec<f64>, domain: Domain) -> Result<Self> {
        let cfg = Configuration { dim: domain.dim(), coords, weights, domain };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the measure and domain invariants.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if self.coords.len() % self.dim != 0 {
            return Err(invalid("coordinate buffer is not a whole number of points"));
        }
        let n = self.coords.len() / self.dim;
        if n == 0 {
            return Err(invalid("a configuration needs at least one point"));
        }
        if self.weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.weights.len() });
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(invalid("weights must be nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        for i in 0..n {
            if !self.domain.contains(self.point(i), DOMAIN_TOL) {
                return Err(invalid(format!("point {i} violates its domain constraint")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radii(&self) -> Vec<f64> {
        self.points().map(norm).collect()
    }
}

/// Distance used by distance-power kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclid,
    /// Great-circle angle between the directions of the two points.
    Geodesic,
    /// Flat-torus distance on `[0, 1)^2`.
    Torus,
}

/// Which pair interaction to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `1/(s r^s)`, or `-log r` when `s == 0`.
    Riesz { s: f64 },
    Log,
    /// The Riesz profile applied to the geodesic distance.
    GeodesicRiesz { s: f64 },
    /// `|<x, y>|^p`.
    PFrame { p: f64 },
    /// `rho(x, y)^alpha`.
    DistancePower { alpha: f64, metric: Metric },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Riesz { s } | KernelSpec::GeodesicRiesz { s } if !s.is_finite() => {
                Err(out_of_range(format!("Riesz exponent must be finite, got {s}")))
            }
            KernelSpec::PFrame { p } if !(p > 0.0 && p.is_finite()) => {
                Err(out_of_range(format!("p-frame exponent must be positive, got {p}")))
            }
            KernelSpec::DistancePower { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(out_of_range(format!("distance power must be positive, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the kernel blows up on the diagonal.
    pub fn is_singular(&self) -> bool {
        match *self {
            KernelSpec::Riesz { s } | KernelSpec::GeodesicRiesz { s } => s >= 0.0,
            KernelSpec::Log => true,
            KernelSpec::PFrame { .. } | KernelSpec::DistancePower { .. } => false,
        }
    }
}

/// Requires `-2 < s < d` for a Riesz kernel in ambient dimension `d`.
pub fn check_riesz_range(s: f64, d: usize) -> Result<()> {
    if s > -2.0 && s < d as f64 {
        Ok(())
    } else {
        Err(out_of_range(format!("Riesz exponent s={s} outside (-2, {d})")))
    }
}

/// Riesz profile `r^-s / s` (or `-log r`), and its derivative in `r`.
#[inline]
pub fn riesz_profile(s: f64, r: f64) -> (f64, f64) {
    if s == 0.0 {
        (-r.ln(), -1.0 / r)
    } else {
        let rs = r.powf(-s);
        (rs / s, -rs / r)
    }
}

/// Radial power field `V(x) = (gamma / alpha) |x|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub gamma: f64,
    pub alpha: f64,
}

impl FieldSpec {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(out_of_range(format!("field strength gamma must be positive, got {gamma}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(out_of_range(format!("field power alpha must be positive, got {alpha}")));
        }
        Ok(FieldSpec { gamma, alpha })
    }

    /// `alpha > max(-s, 0)`, needed for confinement under a Riesz-s kernel.
    pub fn check_confining(&self, s: f64) -> Result<()> {
        if self.alpha > (-s).max(0.0) {
            Ok(())
        } else {
            Err(out_of_range(format!("alpha={} must exceed max(-s, 0) for s={s}", self.alpha)))
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.gamma / self.alpha * norm(x).powf(self.alpha)
    }

    /// Adds `scale * grad V(x)` to `out`.
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let r = norm(x);
        if r == 0.0 {
            return;
        }
        let f = scale * self.gamma * r.powf(self.alpha - 2.0);
        out.iter_mut().zip(x).for_each(|(o, v)| *o += f * v);
    }
}

pub fn field_eval(field: &FieldSpec, x: &[f64]) -> f64 {
    field.eval(x)
}

/// Pair-sum normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// `sum_{i != j} w_i w_j K(x_i, x_j) + 2 sum_i w_i V(x_i)`.
    MeanField,
    /// `sum_{i != j} K(x_i, x_j)`; weights and field are ignored.
    RawSum,
}

fn torus_offset(a: f64, b: f64) -> f64 {
    let d = a - b;
    [d - 1.0, d, d + 1.0]
        .into_iter()
        .min_by(|u, v| u.abs().total_cmp(&v.abs()))
        .unwrap_or(d)
}

/// Distance between two points under `metric`. The torus distance takes the
/// minimum over the nine shifts in `{-1, 0, 1}^2`.
pub fn pairwise_distance(metric: Metric, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    Ok(match metric {
        Metric::Euclid => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Metric::Geodesic => {
            let t = dot(x, y) / (norm(x) * norm(y));
            t.clamp(-1.0, 1.0).acos()
        }
        Metric::Torus => {
            if x.len() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
            }
            let mut best = f64::INFINITY;
            for k0 in [-1.0, 0.0, 1.0] {
                for k1 in [-1.0, 0.0, 1.0] {
                    let d0 = x[0] - y[0] + k0;
                    let d1 = x[1] - y[1] + k1;
                    best = best.min((d0 * d0 + d1 * d1).sqrt());
                }
            }
            best
        }
    })
}

/// Kernel value for one pair. Returns `+inf` for coincident points under a
/// singular kernel.
pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if let KernelSpec::DistancePower { metric: Metric::Torus, .. } = kernel {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
        }
    }
    let (value, dist) = pair_value(kernel, x, y);
    if kernel.is_singular() && dist == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(value)
}

/// Kernel value and the relevant distance (used for the degeneracy check).
#[inline]
fn pair_value(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> (f64, f64) {
    match *kernel {
        KernelSpec::Riesz { s } => {
            let r = euclid(x, y);
            (riesz_profile(s, r).0, r)
        }
        KernelSpec::Log => {
            let r = euclid(x, y);
            (-r.ln(), r)
        }
        KernelSpec::GeodesicRiesz { s } => {
            let rho = geodesic(x, y);
            (riesz_profile(s, rho).0, rho)
        }
        KernelSpec::PFrame { p } => (dot(x, y).abs().powf(p), f64::INFINITY),
        KernelSpec::DistancePower { alpha, metric } => {
            let r = match metric {
                Metric::Euclid => euclid(x, y),
                Metric::Geodesic => geodesic(x, y),
                Metric::Torus => {
                    let d0 = torus_offset(x[0], y[0]);
                    let d1 = torus_offset(x[1], y[1]);
                    (d0 * d0 + d1 * d1).sqrt()
                }
            };
            (r.powf(alpha), r)
        }
    }
}

#[inline]
fn euclid(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += (a - b) * (a - b);
    }
    acc.sqrt()
}

#[inline]
fn geodesic(x: &[f64], y: &[f64]) -> f64 {
    (dot(x, y) / (norm(x) * norm(y))).clamp(-1.0, 1.0).acos()
}

/// Kernel value for one pair; adds `scale * dK/dx` to `gx` and `scale * dK/dy`
/// to `gy`. Returns `(value, distance)`.
fn pair_with_gradient(
    kernel: &KernelSpec,
    x: &[f64],
    y: &[f64],
    scale: f64,
    gx: &mut [f64],
    gy: &mut [f64],
) -> (f64, f64) {
    match *kernel {
        KernelSpec::Riesz { .. } | KernelSpec::Log | KernelSpec::DistancePower { metric: Metric::Euclid, .. } => {
            let r = euclid(x, y);
            let (v, dv) = match *kernel {
                KernelSpec::Riesz { s } => riesz_profile(s, r),
                KernelSpec::Log => riesz_profile(0.0, r),
                KernelSpec::DistancePower { alpha, .. } => {
                    let ra = r.powf(alpha);
                    (ra, if r > 0.0 { alpha * ra / r } else { 0.0 })
                }
                _ => unreachable!(),
            };
            if r > 0.0 && dv.is_finite() {
                let f = scale * dv / r;
                for c in 0..x.len() {
                    let g = f * (x[c] - y[c]);
                    gx[c] += g;
                    gy[c] -= g;
                }
            }
            (v, r)
        }
        KernelSpec::GeodesicRiesz { .. } | KernelSpec::DistancePower { metric: Metric::Geodesic, .. } => {
            let nx = norm(x);
            let ny = norm(y);
            let t = (dot(x, y) / (nx * ny)).clamp(-1.0, 1.0);
            let rho = t.acos();
            let (v, dv) = match *kernel {
                KernelSpec::GeodesicRiesz { s } => riesz_profile(s, rho),
                KernelSpec::DistancePower { alpha, .. } => {
                    let ra = rho.powf(alpha);
                    (ra, if rho > 0.0 { alpha * ra / rho } else { 0.0 })
                }
                _ => unreachable!(),
            };
            let sin2 = 1.0 - t * t;
            // At t = +-1 the angle has a cusp; the pair term is stationary there.
            if sin2 > 1e-24 && dv.is_finite() {
                let dt = -scale * dv / sin2.sqrt();
                for c in 0..x.len() {
                    gx[c] += dt * (y[c] / (nx * ny) - t * x[c] / (nx * nx));
                    gy[c] += dt * (x[c] / (nx * ny) - t * y[c] / (ny * ny));
                }
            }
            (v, rho)
        }
        KernelSpec::PFrame { p } => {
            let u = dot(x, y);
            let au = u.abs();
            let v = au.powf(p);
            if au > 0.0 {
                let f = scale * p * v / u;
                for c in 0..x.len() {
                    gx[c] += f * y[c];
                    gy[c] += f * x[c];
                }
            }
            (v, f64::INFINITY)
        }
        KernelSpec::DistancePower { alpha, metric: Metric::Torus } => {
            let d0 = torus_offset(x[0], y[0]);
            let d1 = torus_offset(x[1], y[1]);
            let r = (d0 * d0 + d1 * d1).sqrt();
            let v = r.powf(alpha);
            if r > 0.0 {
                let f = scale * alpha * v / (r * r);
                gx[0] += f * d0;
                gx[1] += f * d1;
                gy[0] -= f * d0;
                gy[1] -= f * d1;
            }
            (v, r)
        }
    }
}

fn check_inputs(dim: usize, coords: &[f64], weights: &[f64], kernel: &KernelSpec) -> Result<usize> {
    kernel.validate()?;
    if dim == 0 || coords.len() % dim != 0 {
        return Err(invalid("coordinate buffer is not a whole number of points"));
    }
    let n = coords.len() / dim;
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    if let KernelSpec::DistancePower { metric: Metric::Torus, .. } = kernel {
        if dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: dim });
        }
    }
    Ok(n)
}

/// Energy of a flat point buffer; fills `grad` (same layout as `coords`)
/// when given. This is the workhorse behind the optimizers.
pub fn energy_flat(
    dim: usize,
    coords: &[f64],
    weights: &[f64],
    kernel: &KernelSpec,
    field: Option<&FieldSpec>,
    mode: EnergyMode,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let n = check_inputs(dim, coords, weights, kernel)?;
    let singular = kernel.is_singular();
    if let Some(g) = grad.as_deref_mut() {
        if g.len() != coords.len() {
            return Err(Error::DimensionMismatch { expected: coords.len(), got: g.len() });
        }
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut pair_sum = 0.0;
    for i in 0..n {
        let xi = &coords[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            let xj = &coords[j * dim..(j + 1) * dim];
            let pw = match mode {
                EnergyMode::MeanField => weights[i] * weights[j],
                EnergyMode::RawSum => 1.0,
            };
            let (v, dist) = match grad.as_deref_mut() {
                Some(g) => {
                    let (lo, hi) = g.split_at_mut(j * dim);
                    let gi = &mut lo[i * dim..(i + 1) * dim];
                    let gj = &mut hi[..dim];
                    pair_with_gradient(kernel, xi, xj, 2.0 * pw, gi, gj)
                }
                None => pair_value(kernel, xi, xj),
            };
            if singular && dist < DISTANCE_FLOOR {
                return Err(Error::Degenerate { i, j, floor: DISTANCE_FLOOR });
            }
            pair_sum += pw * v;
        }
    }
    let mut energy = 2.0 * pair_sum;
    if let (EnergyMode::MeanField, Some(field)) = (mode, field) {
        let mut field_sum = 0.0;
        for i in 0..n {
            let xi = &coords[i * dim..(i + 1) * dim];
            field_sum += weights[i] * field.eval(xi);
            if let Some(g) = grad.as_deref_mut() {
                field.add_gradient(xi, 2.0 * weights[i], &mut g[i * dim..(i + 1) * dim]);
            }
        }
        energy += 2.0 * field_sum;
    }
    Ok(energy)
}

/// Discrete energy of a configuration (see [`EnergyMode`]).
pub fn discrete_energy(
    cfg: &Configuration,
    kernel: &KernelSpec,
    field: Option<&FieldSpec>,
    mode: EnergyMode,
) -> Result<f64> {
    energy_flat(cfg.dim, &cfg.coords, &cfg.weights, kernel, field, mode, None)
}

/// Ambient gradient of [`discrete_energy`] with respect to every point.
pub fn discrete_gradient(
    cfg: &Configuration,
    kernel: &KernelSpec,
    field: Option<&FieldSpec>,
    mode: EnergyMode,
) -> Result<Vec<Vec<f64>>> {
    let mut g = vec![0.0; cfg.coords.len()];
    energy_flat(cfg.dim, &cfg.coords, &cfg.weights, kernel, field, mode, Some(&mut g))?;
    Ok(g.chunks_exact(cfg.dim).map(<[f64]>::to_vec).collect())
}

/// Partial derivatives of the mean-field energy with respect to the weights,
/// `2 sum_{j != i} w_j K_ij + 2 V(x_i)`.
pub fn weight_gradient_flat(
    dim: usize,
    coords: &[f64],
    weights: &[f64],
    kernel: &KernelSpec,
    field: Option<&FieldSpec>,
) -> Result<Vec<f64>> {
    let n = check_inputs(dim, coords, weights, kernel)?;
    let singular = kernel.is_singular();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let xi = &coords[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            let xj = &coords[j * dim..(j + 1) * dim];
            let (v, dist) = pair_value(kernel, xi, xj);
            if singular && dist < DISTANCE_FLOOR {
                return Err(Error::Degenerate { i, j, floor: DISTANCE_FLOOR });
            }
            g[i] += 2.0 * weights[j] * v;
            g[j] += 2.0 * weights[i] * v;
        }
        if let Some(field) = field {
            g[i] += 2.0 * field.eval(xi);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free(d: usize) -> Domain {
        Domain::FreeSpace { dim: d }
    }

    #[test]
    fn kernel_values_at_reference_distances() {
        let o = [0.0, 0.0, 0.0];
        let e1 = [1.0, 0.0, 0.0];
        let two = [2.0, 0.0, 0.0];
        assert_abs_diff_eq!(kernel_eval(&KernelSpec::Riesz { s: 2.0 }, &o, &e1).unwrap(), 0.5);
        assert_abs_diff_eq!(kernel_eval(&KernelSpec::Log, &o, &e1).unwrap(), 0.0);
        assert_abs_diff_eq!(kernel_eval(&KernelSpec::Riesz { s: -1.0 }, &o, &two).unwrap(), -2.0);
        assert_eq!(kernel_eval(&KernelSpec::Log, &e1, &e1).unwrap(), f64::INFINITY);
        assert!(kernel_eval(&KernelSpec::Log, &e1, &[1.0, 0.0]).is_err());
        assert!(kernel_eval(&KernelSpec::PFrame { p: -1.0 }, &e1, &e1).is_err());
    }

    #[test]
    fn field_values() {
        let f = FieldSpec::new(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(field_eval(&f, &[2.0, 0.0]), 2.0, epsilon = 1e-15);
        let f = FieldSpec::new(3.0, 3.0).unwrap();
        assert_eq!(field_eval(&f, &[0.0, 0.0, 0.0]), 0.0);
        let f = FieldSpec::new(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(field_eval(&f, &[0.3, 0.4]), 1.0, epsilon = 1e-15);
        assert!(FieldSpec::new(0.0, 1.0).is_err());
        assert!(FieldSpec::new(1.0, 1.0).unwrap().check_confining(-1.5).is_err());
    }

    #[test]
    fn distances() {
        let t = pairwise_distance(Metric::Torus, &[0.0, 0.0], &[0.9, 0.0]).unwrap();
        assert_abs_diff_eq!(t, 0.1, epsilon = 1e-15);
        let t = pairwise_distance(Metric::Torus, &[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(t, 0.5f64.sqrt(), epsilon = 1e-15);
        let g = pairwise_distance(Metric::Geodesic, &[0.0, 0.0, 1.0], &[0.0, 0.0, -1.0]).unwrap();
        assert_abs_diff_eq!(g, std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn raw_sums_for_two_points() {
        let s = Domain::Sphere { dim: 3, radius: 1.0 };
        let cfg = Configuration::uniform(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]], s).unwrap();
        let e = discrete_energy(&cfg, &KernelSpec::Log, None, EnergyMode::RawSum).unwrap();
        assert_abs_diff_eq!(e, -2.0 * 2f64.ln(), epsilon = 1e-15);
        let e = discrete_energy(&cfg, &KernelSpec::Riesz { s: 1.0 }, None, EnergyMode::RawSum).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coincident_points_are_degenerate_under_singular_kernels() {
        let p = vec![0.5, 0.5];
        let cfg = Configuration::uniform(&[p.clone(), p], free(2)).unwrap();
        let err = discrete_energy(&cfg, &KernelSpec::Riesz { s: 1.0 }, None, EnergyMode::RawSum);
        assert!(matches!(err, Err(Error::Degenerate { .. })));
        // Non-singular kernels are fine with coincident points.
        assert!(discrete_energy(&cfg, &KernelSpec::Riesz { s: -1.0 }, None, EnergyMode::RawSum).is_ok());
    }

    /// Reference evaluator: a plain double loop over ordered pairs.
    fn double_loop(cfg: &Configuration, kernel: &KernelSpec, field: &FieldSpec) -> f64 {
        let mut e = 0.0;
        for i in 0..cfg.len() {
            for j in 0..cfg.len() {
                if i != j {
                    e += cfg.weights()[i] * cfg.weights()[j] * kernel_eval(kernel, cfg.point(i), cfg.point(j)).unwrap();
                }
            }
        }
        for i in 0..cfg.len() {
            e += 2.0 * cfg.weights()[i] * field.eval(cfg.point(i));
        }
        e
    }

    #[test]
    fn mean_field_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let cfg = Configuration::uniform(&pts, free(3)).unwrap();
        let k = KernelSpec::Riesz { s: 1.0 };
        let f = FieldSpec::new(1.0, 2.0).unwrap();
        let e = discrete_energy(&cfg, &k, Some(&f), EnergyMode::MeanField).unwrap();
        assert_abs_diff_eq!(e, double_loop(&cfg, &k, &f), epsilon = 1e-14);
    }

    #[test]
    fn two_points_repel() {
        let cfg = Configuration::uniform(&[vec![0.0, 0.0], vec![1.0, 0.0]], free(2)).unwrap();
        let g = discrete_gradient(&cfg, &KernelSpec::Riesz { s: 1.0 }, None, EnergyMode::RawSum).unwrap();
        // Descent direction is -g: point 0 moves to -x, point 1 to +x.
        assert!(g[0][0] > 0.0 && g[1][0] < 0.0);
    }

    #[test]
    fn symmetric_configuration_has_zero_net_gradient() {
        let pts = vec![vec![1.0, 0.2, 0.0], vec![-1.0, -0.2, 0.0], vec![0.0, 0.7, 0.5], vec![0.0, -0.7, -0.5]];
        let cfg = Configuration::uniform(&pts, free(3)).unwrap();
        let f = FieldSpec::new(1.0, 3.0).unwrap();
        let g = discrete_gradient(&cfg, &KernelSpec::Riesz { s: 1.0 }, Some(&f), EnergyMode::MeanField).unwrap();
        for c in 0..3 {
            let total: f64 = g.iter().map(|v| v[c]).sum();
            assert!(total.abs() < 1e-12);
        }
    }

    fn random_config(rng: &mut ChaCha8Rng, n: usize, domain: Domain) -> Configuration {
        let d = domain.dim();
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                if let Domain::Torus2 = domain {
                    p.iter_mut().for_each(|v| *v = v.abs());
                }
                domain.project(&mut p);
                p
            })
            .collect();
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= t);
        Configuration::new(&pts, w, domain).unwrap()
    }

    /// Central finite differences against the analytic gradient.
    fn check_fd(cfg: &Configuration, kernel: &KernelSpec, field: Option<&FieldSpec>, mode: EnergyMode) {
        let h = 1e-5;
        let g = discrete_gradient(cfg, kernel, field, mode).unwrap();
        let scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        let d = cfg.dim();
        for i in 0..cfg.len() {
            for c in 0..d {
                let mut plus = cfg.coords().to_vec();
                let mut minus = cfg.coords().to_vec();
                plus[i * d + c] += h;
                minus[i * d + c] -= h;
                let ep = energy_flat(d, &plus, cfg.weights(), kernel, field, mode, None).unwrap();
                let em = energy_flat(d, &minus, cfg.weights(), kernel, field, mode, None).unwrap();
                let fd = (ep - em) / (2.0 * h);
                assert!(
                    (fd - g[i][c]).abs() <= 1e-6 * scale,
                    "{kernel:?} point {i} coord {c}: fd {fd} vs {}",
                    g[i][c]
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_for_every_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = FieldSpec::new(1.3, 2.5).unwrap();
        let cases = [
            (KernelSpec::Riesz { s: 1.0 }, free(3)),
            (KernelSpec::Riesz { s: -1.0 }, free(3)),
            (KernelSpec::Riesz { s: 0.0 }, free(3)),
            (KernelSpec::Log, free(3)),
            (KernelSpec::GeodesicRiesz { s: 0.5 }, free(3)),
            (KernelSpec::PFrame { p: 3.0 }, free(3)),
            (KernelSpec::DistancePower { alpha: 1.5, metric: Metric::Euclid }, free(3)),
            (KernelSpec::DistancePower { alpha: 1.5, metric: Metric::Geodesic }, free(3)),
            (KernelSpec::DistancePower { alpha: 1.5, metric: Metric::Torus }, Domain::Torus2),
        ];
        for (k, dom) in cases {
            let cfg = random_config(&mut rng, 5, dom);
            check_fd(&cfg, &k, Some(&f), EnergyMode::MeanField);
            check_fd(&cfg, &k, None, EnergyMode::RawSum);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn energy_is_permutation_and_rotation_invariant(seed in 0u64..1000, angle in 0.0f64..6.28) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = random_config(&mut rng, 6, free(3));
            let k = KernelSpec::Riesz { s: 0.7 };
            let e = discrete_energy(&cfg, &k, None, EnergyMode::MeanField).unwrap();

            let n = cfg.len();
            let perm: Vec<usize> = (0..n).rev().collect();
            let pts: Vec<Vec<f64>> = perm.iter().map(|&i| cfg.point(i).to_vec()).collect();
            let w: Vec<f64> = perm.iter().map(|&i| cfg.weights()[i]).collect();
            let permuted = Configuration::new(&pts, w, free(3)).unwrap();
            let ep = discrete_energy(&permuted, &k, None, EnergyMode::MeanField).unwrap();
            prop_assert!((e - ep).abs() <= 1e-12 * e.abs().max(1.0));

            let (c, s) = (angle.cos(), angle.sin());
            let rot: Vec<Vec<f64>> = cfg.points().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect();
            let rotated = Configuration::new(&rot, cfg.weights().to_vec(), free(3)).unwrap();
            let er = discrete_energy(&rotated, &k, None, EnergyMode::MeanField).unwrap();
            prop_assert!((e - er).abs() <= 1e-12 * e.abs().max(1.0));
        }

        #[test]
        fn torus_and_geodesic_distances_are_bounded(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
            let t = pairwise_distance(Metric::Torus, &[a, b], &[c, d]).unwrap();
            prop_assert!(t <= 0.5f64.sqrt() + 1e-15);
            let g = pairwise_distance(Metric::Geodesic, &[a - 0.5, b - 0.5, 0.3], &[c - 0.5, d - 0.5, -0.2]).unwrap();
            prop_assert!(g <= std::f64::consts::PI);
        }
    }

    #[test]
    fn simplex_projection() {
        let mut w = vec![0.5, 0.8, -0.2];
        project_probability_simplex(&mut w);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(w.iter().all(|&v| v >= 0.0));
        let mut x = vec![0.2, 0.3];
        Domain::Simplex { dim: 2 }.project(&mut x);
        assert_eq!(x, vec![0.2, 0.3]);
        let mut x = vec![0.9, 0.9];
        Domain::Simplex { dim: 2 }.project(&mut x);
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn configuration_invariants_are_enforced() {
        let s = Domain::Sphere { dim: 2, radius: 1.0 };
        assert!(Configuration::uniform(&[vec![1.0, 0.1]], s).is_err());
        assert!(Configuration::new(&[vec![1.0, 0.0]], vec![0.9], s).is_err());
        assert!(Configuration::new(&[vec![1.0, 0.0, 0.0]], vec![1.0], s).is_err());
    }
}
